"""Laplace-domain solution of the measurement-averaged survival.

The averaged propagator is

    U~(eps) = Om^-1 Phi(Om) [Phi(Om) + Q]^-1,    Om = eps + L,

with ``Phi`` the renewal model's auxiliary function applied to the
superoperator ``Om`` and ``Q`` the complement of the projector onto the
measured state.  The survival transform is its ``<mm|.|mm>`` element
(supermatrix method).  Because the projector is rank one, the same quantity
follows from scalar transforms of the unmeasured survival ``p1``:

    p~(eps) = P~_p1(eps) / (1 - W~_p1(eps)),
    X~_p1(eps) = int_0^inf exp(-eps t) X(t) p1(t) dt      (X = P, W)

(scalar method).  Time-domain curves come from numerical inversion, see
:mod:`zeno.inversion`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy import integrate

from . import closed_forms
from .inversion import InversionSettings, invert
from .liouville import (
    RelaxationParams,
    SpectralSurvival,
    SystemModel,
    TwoLevelParams,
    BranchCutError,
    eig_checked,
    generator,
    projector_superops,
)
from .renewal import Equidistant, MittagLeffler, Poisson, RenewalModel, describe, pdf_W, survival_P

METHOD_TAGS = (
    "supermatrix",
    "scalar",
    "poisson-closed",
    "anomalous-closed",
    "relaxed-anomalous-closed",
    "custom",
)
PROBABILITY_TOL = 1e-6
# scalar method: integrand bound at the quadrature horizon
QUAD_TAIL = 1e-10
QUAD_EPSREL = 1e-11
QUAD_EPSABS = 1e-13
# scalar method refused for heavy tails below this fraction of w_r
SCALAR_ML_MIN_EPS = 1e-3
ZENO_EPS = (1e-4, 5e-5, 2.5e-5)
ZENO_CONSISTENCY = 5e-3
MIN_BLOCK_POINTS = 4
# initial-value theorem: p(0) = lim eps p~(eps), evaluated at this multiple of the rate scale
INITIAL_VALUE_EPS = 1e9


class QuadratureError(ArithmeticError):
    """Scalar-method quadrature missed its tolerance."""


class ZenoTimeDivergenceError(ValueError):
    """The Zeno time is infinite (heavy-tailed renewals)."""


class InversionClipWarning(RuntimeWarning):
    pass


# ---------------------------------------------------------------------------
# averaged propagator


def _measured_element(model: SystemModel) -> int:
    return model.measured_index * model.dim + model.measured_index


def _right_divide(A, B):
    # A B^-1 for stacks of matrices
    return np.linalg.solve(B.swapaxes(-1, -2), A.swapaxes(-1, -2)).swapaxes(-1, -2)


class _Superops:
    """Generator, projectors and the cached spectral data of one model."""

    def __init__(self, model: SystemModel):
        self.model = model
        self.L = generator(model)
        self.n = self.L.shape[0]
        self.P, self.Q = projector_superops(model.measured_index, model.dim)
        self.eye = np.eye(self.n, dtype=complex)
        self._eig = None
        self._expm = {}

    def eig(self):
        if self._eig is None:
            w, V = eig_checked(self.L)
            self._eig = (w, V, np.linalg.inv(V))
        return self._eig

    def expm(self, t):
        if t not in self._expm:
            self._expm[t] = scipy.linalg.expm(-t * self.L)
        return self._expm[t]

    def omega(self, eps):
        return eps[..., None, None] * self.eye + self.L


def _propagator(ops: _Superops, eps, renewal: RenewalModel):
    eps = np.asarray(eps, dtype=complex)
    if np.any(eps.real <= 0):
        raise ValueError("the averaged propagator needs Re(eps) > 0")
    Om = ops.omega(eps)
    if isinstance(renewal, Poisson):
        Phi = Om / renewal.w_r
        return _right_divide(np.linalg.solve(Om, Phi), Phi + ops.Q)
    if isinstance(renewal, Equidistant):
        # Phi (Phi + Q)^-1 = (1 - E)(1 - P E)^-1 with E = exp(-t_r Om); this form
        # never overflows for large eps, unlike exp(t_r Om) - 1.
        E = np.exp(-renewal.t_r * eps)[..., None, None] * ops.expm(renewal.t_r)
        return _right_divide(np.linalg.solve(Om, ops.eye - E), ops.eye - ops.P @ E)
    w, V, Vinv = ops.eig()
    z = eps[..., None] + w
    scale = max(1.0, float(np.max(np.abs(z))))
    on_cut = (z.real <= 0) & (np.abs(z.imag) <= 1e-12 * scale)
    if np.any(on_cut):
        raise BranchCutError(f"eigenvalue(s) {z[on_cut][:3]} of eps + L on the branch cut")
    phi = (z / renewal.w_r) ** renewal.alpha
    Phi = (V * phi[..., None, :]) @ Vinv
    OmInvPhi = (V * (phi / z)[..., None, :]) @ Vinv
    return _right_divide(OmInvPhi, Phi + ops.Q)


def averaged_propagator_laplace(eps, model: SystemModel, renewal: RenewalModel) -> np.ndarray:
    """Laplace-transformed averaged propagator ``U~(eps)``.

    Parameters
    ----------
    eps : complex or array_like
        Laplace arguments with ``Re(eps) > 0``; the result has shape
        ``eps.shape + (d*d, d*d)``.
    model : SystemModel
    renewal : RenewalModel

    Raises
    ------
    numpy.linalg.LinAlgError
        If ``Phi(Om) + Q`` is singular, or (Mittag-Leffler) the generator is
        too close to defective for its eigendecomposition.
    BranchCutError
        If ``eps + L`` has an eigenvalue on the negative real axis.
    """
    return _propagator(_Superops(model), eps, renewal)


# ---------------------------------------------------------------------------
# Laplace-domain survival


@dataclass(frozen=True)
class LaplaceSurvival:
    """A Laplace-domain survival transform ready for inversion.

    Attributes
    ----------
    evaluator : callable
        Vectorized map from complex ``eps`` (``Re eps > sigma``) to ``p~(eps)``.
    singularity_abscissa : float
        ``sigma``: every singularity has ``Re <= sigma``.
    method_tag : str
        One of :data:`METHOD_TAGS`.
    frequency : float
        Bound on ``|Im|`` of the singularities, i.e. the fastest oscillation
        of ``p(t)``; 0 if unknown or absent.
    rate_scale : float
        Largest rate of the problem; sets where ``eps p~(eps) -> p(0)`` is read off.
    metadata : dict
        Descriptors of the model and renewal statistics.
    """

    evaluator: Callable
    singularity_abscissa: float = 0.0
    method_tag: str = "custom"
    frequency: float = 0.0
    rate_scale: float = 1.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method_tag not in METHOD_TAGS:
            raise ValueError(f"unknown method tag {self.method_tag!r}")

    def __call__(self, eps):
        return self.evaluator(eps)

    def initial_value(self) -> float:
        """``lim eps p~(eps)`` for real ``eps -> inf``, i.e. ``p(0)``."""
        e = INITIAL_VALUE_EPS * max(1.0, self.rate_scale)
        return float(np.real(e * self.evaluator(np.array([e + 0j]))[0]))


def _two_level_params(model: SystemModel) -> Optional[TwoLevelParams]:
    if model.dim != 2 or model.measured_index != 0:
        return None
    H = model.hamiltonian
    v = abs(H[0, 1])
    if v == 0:
        return None
    eps_level = 0.5 * (H[0, 0] - H[1, 1]).real
    if eps_level < 0:
        return None
    return TwoLevelParams(float(eps_level), float(v))


def _system_metadata(model: SystemModel) -> dict:
    meta = {"dim": model.dim, "measured_index": model.measured_index}
    p = _two_level_params(model)
    if p is not None:
        meta.update(epsilon=p.epsilon, v=p.v)
    else:
        H = np.asarray(model.hamiltonian)
        meta["hamiltonian"] = {"real": H.real.tolist(), "imag": H.imag.tolist()}
    if model.relaxation is not None:
        meta["w_d"] = model.relaxation.w_d
        meta["w_p"] = model.relaxation.w_p
    return meta


def _rate_scale(model: SystemModel, renewal: Optional[RenewalModel]) -> float:
    L = generator(model)
    scale = float(np.max(np.abs(np.linalg.eigvals(L)))) if L.size else 0.0
    scale = max(scale, float(np.max(np.abs(model.hamiltonian))))
    if renewal is not None:
        scale = max(scale, renewal.rate)
    return scale


def _frequency_bound(ops: _Superops, renewal: RenewalModel) -> float:
    f = float(np.max(np.abs(np.linalg.eigvals(ops.L).imag)))
    if isinstance(renewal, Poisson):
        # poles at -eig(L + w_r Q)
        f = max(f, float(np.max(np.abs(np.linalg.eigvals(ops.L + renewal.w_r * ops.Q).imag))))
    return f


def supermatrix_survival(model: SystemModel, renewal: RenewalModel) -> LaplaceSurvival:
    """``p~(eps) = <mm| U~(eps) |mm>`` as a :class:`LaplaceSurvival`."""
    ops = _Superops(model)
    k = _measured_element(model)

    def evaluator(eps):
        eps = np.asarray(eps, dtype=complex)
        return _propagator(ops, eps, renewal)[..., k, k]

    return LaplaceSurvival(
        evaluator,
        0.0,
        "supermatrix",
        frequency=_frequency_bound(ops, renewal),
        rate_scale=_rate_scale(model, renewal),
        metadata={"system": _system_metadata(model), "renewal": describe(renewal), "method": "supermatrix"},
    )


def _quad_horizon(eps_re_min: float, decay: float) -> float:
    return math.log(1.0 / QUAD_TAIL) / (eps_re_min + decay)


def _quad(fun, a, b, points=None):
    if b <= a:
        return 0.0
    res, err = integrate.quad_vec(fun, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL,
                                  norm="max", points=points, limit=20000)
    scale = float(np.max(np.abs(res))) if np.size(res) else 0.0
    if not np.all(np.isfinite(res)) or err > 100.0 * max(QUAD_EPSREL * scale, QUAD_EPSABS):
        raise QuadratureError(f"quadrature did not converge: error estimate {err:.3g} for |value| {scale:.3g}")
    return res


def _period_points(a, b, period, max_points=4000):
    if not np.isfinite(period) or period <= 0 or b <= a:
        return None
    n = int((b - a) / period)
    if n < 2:
        return None
    step = max(1, n // max_points)
    return list(a + period * np.arange(1, n, step))


def _decay_points(eps, a, b, points=None):
    # breakpoints at the 1/Re(eps) scales so large eps (mass near t = a) is not missed
    scales = a + np.geomspace(1.0, 30.0, 4)[None, :] / np.unique(eps.real)[:, None]
    extra = [float(x) for x in scales.ravel() if a < x < b]
    merged = sorted(set(extra) | set(points or []))
    return merged or None


def scalar_transforms(eps, model: SystemModel, renewal: RenewalModel):
    """``(P~_p1(eps), W~_p1(eps))`` by quadrature of the unmeasured survival.

    Raises
    ------
    QuadratureError
        If the adaptive quadrature misses its tolerance.
    ValueError
        For Mittag-Leffler renewals with ``Re eps < w_r / 1000``: the heavy tail
        makes the truncated quadrature uncontrolled there.
    """
    eps = np.atleast_1d(np.asarray(eps, dtype=complex))
    if np.any(eps.real <= 0):
        raise ValueError("scalar transforms need Re(eps) > 0")
    p1 = SpectralSurvival(model)
    freq = float(np.max(np.abs(np.linalg.eigvals(generator(model)).imag)))
    period = 2.0 * math.pi / freq if freq > 0 else math.inf
    re_min = float(eps.real.min())

    def stacked(vals):
        return np.concatenate([vals.real, vals.imag], axis=-1)

    def unstack(x):
        m = x.shape[-1] // 2
        return x[..., :m] + 1j * x[..., m:]

    if isinstance(renewal, Equidistant):
        tr = renewal.t_r

        def f(t):
            return stacked(np.exp(-eps * t) * p1(t))

        Pt = unstack(_quad(f, 0.0, tr, _decay_points(eps, 0.0, tr, _period_points(0.0, tr, period))))
        Wt = np.exp(-eps * tr) * p1(tr)
        return Pt, Wt

    if isinstance(renewal, Poisson):
        w = renewal.w_r
        T = _quad_horizon(re_min, w)

        def f(t):
            base = np.exp(-(eps + w) * t) * p1(t)
            return stacked(base)

        Pt = unstack(_quad(f, 0.0, T, _decay_points(eps + w, 0.0, T, _period_points(0.0, T, period))))
        return Pt, w * Pt

    if re_min < SCALAR_ML_MIN_EPS * renewal.w_r:
        raise ValueError(
            f"scalar method refused for Mittag-Leffler renewals at Re(eps) = {re_min:.3g} "
            f"< w_r/1000 = {SCALAR_ML_MIN_EPS * renewal.w_r:.3g}; use the supermatrix method"
        )
    a, w = renewal.alpha, renewal.w_r
    T = _quad_horizon(re_min, 0.0)
    t1 = min(1.0 / w, T)

    def integrand(t):
        t = np.atleast_1d(t)
        e = np.exp(-np.multiply.outer(t, eps)) * p1(t)[..., None]
        Pv = survival_P(renewal, t)[..., None] * e
        Wv = pdf_W(renewal, t)[..., None] * e
        return np.concatenate([stacked(Pv), stacked(Wv)], axis=-1)

    def head(u):
        # t = u^(1/alpha) absorbs the t^(alpha-1) singularity of W at the origin
        t = u ** (1.0 / a)
        jac = (1.0 / a) * u ** (1.0 / a - 1.0)
        return integrand(t)[0] * jac

    def tail(t):
        return integrand(t)[0]

    # same breakpoints on the u = t^alpha scale of the head
    hp = _decay_points(eps, 0.0, t1)
    res = (_quad(head, 0.0, t1 ** a, None if hp is None else [x ** a for x in hp])
           + _quad(tail, t1, T, _decay_points(eps, t1, T, _period_points(t1, T, period))))
    m = eps.size
    Pt = unstack(res[: 2 * m])
    Wt = unstack(res[2 * m :])
    return Pt, Wt


def scalar_survival(model: SystemModel, renewal: RenewalModel) -> LaplaceSurvival:
    """``p~ = P~_p1 / (1 - W~_p1)`` as a :class:`LaplaceSurvival`."""

    def evaluator(eps):
        eps = np.asarray(eps, dtype=complex)
        Pt, Wt = scalar_transforms(eps.ravel(), model, renewal)
        return (Pt / (1.0 - Wt)).reshape(eps.shape)

    ops = _Superops(model)
    return LaplaceSurvival(
        evaluator,
        0.0,
        "scalar",
        frequency=_frequency_bound(ops, renewal),
        rate_scale=_rate_scale(model, renewal),
        metadata={"system": _system_metadata(model), "renewal": describe(renewal), "method": "scalar"},
    )


def survival_laplace(eps, model: SystemModel, renewal: RenewalModel, method: str = "supermatrix"):
    """Survival transform ``p~(eps)`` by the supermatrix or the scalar method."""
    if method == "supermatrix":
        f = supermatrix_survival(model, renewal)
    elif method == "scalar":
        f = scalar_survival(model, renewal)
    else:
        raise ValueError(f"unknown method {method!r}; expected 'supermatrix' or 'scalar'")
    e = np.asarray(eps, dtype=complex)
    out = f(np.atleast_1d(e))
    return out.reshape(e.shape) if e.ndim else complex(out[0])


def poisson_closed_survival(p: TwoLevelParams, w_r: float, r: Optional[RelaxationParams] = None):
    """Closed-form Poissonian transform wrapped as a :class:`LaplaceSurvival`."""
    wd, wp = (0.0, 0.0) if r is None else (r.w_d, r.w_p)
    meta = {"system": {"epsilon": p.epsilon, "v": p.v}, "renewal": describe(Poisson(w_r)),
            "method": "poisson-closed"}
    if r is not None:
        meta["system"].update(w_d=wd, w_p=wp)
    return LaplaceSurvival(
        lambda e: closed_forms.survival_laplace_poisson(np.asarray(e, dtype=complex), p, r, w_r),
        0.0,
        "poisson-closed",
        frequency=2.0 * p.energy + 2.0 * p.v,
        rate_scale=max(w_r, p.energy, wd, wp),
        metadata=meta,
    )


def anomalous_closed_survival(p: TwoLevelParams, alpha: float):
    """Large-rate Mittag-Leffler limit wrapped as a :class:`LaplaceSurvival`."""
    return LaplaceSurvival(
        lambda e: closed_forms.survival_laplace_anomalous_limit(e, p, alpha),
        0.0,
        "anomalous-closed",
        frequency=2.0 * p.energy,
        rate_scale=p.energy,
        metadata={"system": {"epsilon": p.epsilon, "v": p.v}, "alpha": alpha, "method": "anomalous-closed"},
    )


def relaxed_anomalous_closed_survival(alpha: float, w_tilde_d0: float):
    """Fast-dephasing anomalous limit wrapped as a :class:`LaplaceSurvival`."""
    return LaplaceSurvival(
        lambda e: closed_forms.survival_laplace_relaxed_anomalous(e, alpha, w_tilde_d0),
        0.0,
        "relaxed-anomalous-closed",
        frequency=0.0,
        rate_scale=max(1.0, w_tilde_d0),
        metadata={"alpha": alpha, "w_tilde_d0": w_tilde_d0, "method": "relaxed-anomalous-closed"},
    )


# ---------------------------------------------------------------------------
# time domain


@dataclass(frozen=True, eq=False)
class SurvivalCurve:
    """Survival probabilities on a time grid.

    Attributes
    ----------
    times, values : ndarray
    stderr : ndarray, optional
        Monte-Carlo standard errors.
    provenance : {'analytic', 'monte-carlo'}
    metadata : dict
        Model and renewal descriptors, method and settings.
    error_estimate : ndarray, optional
        Per-point truncation-error estimate of the inversion.
    """

    times: np.ndarray
    values: np.ndarray
    stderr: Optional[np.ndarray] = None
    provenance: str = "analytic"
    metadata: dict = field(default_factory=dict)
    error_estimate: Optional[np.ndarray] = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or v.shape != t.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.provenance not in ("analytic", "monte-carlo"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        for name in ("stderr", "error_estimate"):
            x = getattr(self, name)
            if x is not None:
                x = np.asarray(x, dtype=float)
                if x.shape != t.shape:
                    raise ValueError(f"{name} must match the time grid")
                object.__setattr__(self, name, x)

    def __len__(self):
        return self.times.size

    def tolerance(self) -> np.ndarray:
        """Allowed excursion outside ``[0, 1]`` per point."""
        if self.provenance == "monte-carlo" and self.stderr is not None:
            return np.maximum(4.0 * self.stderr, 1e-12)
        return np.full(self.times.shape, PROBABILITY_TOL)

    def check(self):
        """Raise ``ValueError`` if the curve is not a valid survival probability."""
        tol = self.tolerance()
        bad = (self.values < -tol) | (self.values > 1.0 + tol)
        if np.any(bad):
            raise ValueError(f"survival values out of [0, 1] at t = {self.times[bad][:5]}")
        at0 = self.times == 0
        if np.any(np.abs(self.values[at0] - 1.0) > tol[at0]):
            raise ValueError("survival at t = 0 differs from 1")

    def to_dict(self) -> dict:
        d = {
            "provenance": self.provenance,
            "metadata": self.metadata,
            "times": self.times.tolist(),
            "values": self.values.tolist(),
        }
        if self.stderr is not None:
            d["stderr"] = self.stderr.tolist()
        if self.error_estimate is not None:
            d["error_estimate"] = self.error_estimate.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SurvivalCurve":
        return cls(
            np.array(d["times"], dtype=float),
            np.array(d["values"], dtype=float),
            None if d.get("stderr") is None else np.array(d["stderr"], dtype=float),
            d.get("provenance", "analytic"),
            dict(d.get("metadata", {})),
            None if d.get("error_estimate") is None else np.array(d["error_estimate"], dtype=float),
        )


def invert_laplace(f: LaplaceSurvival, times, settings: Optional[InversionSettings] = None,
                   probability: bool = True) -> SurvivalCurve:
    """Numerically invert ``f`` on ``times`` (``t = 0`` allowed).

    ``t = 0`` takes the initial-value limit ``eps p~(eps)``.  With
    ``probability`` set, values outside ``[-1e-6, 1 + 1e-6]`` are clipped to
    ``[0, 1]`` with an :class:`InversionClipWarning`; values inside that band
    are returned untouched.
    """
    settings = settings or InversionSettings()
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(times < 0):
        raise ValueError("times must be a 1-d array of non-negative values")
    values = np.empty(times.size)
    err = np.zeros(times.size)
    pos = times > 0
    if np.any(pos):
        values[pos], err[pos] = invert(f.evaluator, times[pos], settings, sigma=f.singularity_abscissa,
                                       frequency=f.frequency, return_error=True)
    if np.any(~pos):
        values[~pos] = f.initial_value()
    if probability:
        bad = (values < -PROBABILITY_TOL) | (values > 1.0 + PROBABILITY_TOL)
        if np.any(bad):
            warnings.warn(
                f"inverted survival outside [0, 1] at {int(bad.sum())} point(s) "
                f"(worst {values[bad][np.argmax(np.abs(values[bad] - 0.5))]:.3g}); clipped",
                InversionClipWarning,
                stacklevel=2,
            )
            values = np.where(bad, np.clip(values, 0.0, 1.0), values)
    meta = dict(f.metadata)
    meta["inversion"] = {
        "n_terms": settings.n_terms,
        "period_factor": settings.period_factor,
        "shift": settings.shift,
        "grouping": settings.grouping,
        "head_margin": settings.head_margin,
    }
    return SurvivalCurve(times, values, None, "analytic", meta, err)


def equidistant_survival(model: SystemModel, renewal: Equidistant, times) -> np.ndarray:
    """Exact survival for equidistant measurements: ``p1(t - n t_r) p1(t_r)^n``."""
    times = np.asarray(times, dtype=float)
    p1 = SpectralSurvival(model)
    n = np.floor(times / renewal.t_r)
    return p1(times - n * renewal.t_r) * p1(renewal.t_r) ** n


def analytic_curve(model: SystemModel, renewal: RenewalModel, times, method: str = "supermatrix",
                   settings: Optional[InversionSettings] = None) -> SurvivalCurve:
    """Analytic-engine survival curve.

    Equidistant measurements use the exact time-domain product (the inverse
    transform of a function with kinks at every ``n t_r`` converges poorly);
    the other models invert the chosen Laplace-domain method.
    """
    if isinstance(renewal, Equidistant):
        times = np.asarray(times, dtype=float)
        meta = {"system": _system_metadata(model), "renewal": describe(renewal), "method": "equidistant-product"}
        return SurvivalCurve(times, equidistant_survival(model, renewal, times), None, "analytic", meta)
    f = supermatrix_survival(model, renewal) if method == "supermatrix" else scalar_survival(model, renewal)
    return invert_laplace(f, times, settings)


# ---------------------------------------------------------------------------
# Zeno time


def zeno_time(model: SystemModel, renewal: RenewalModel) -> float:
    """``t_Z = int_0^inf p(t) dt = p~(0)``.

    Poissonian two-level models use the closed form ``1/w_r + 1/w_bar_d(0)``;
    otherwise ``p~`` is evaluated at ``eps = (1e-4, 5e-5, 2.5e-5) v`` and
    Richardson-extrapolated to zero.

    Raises
    ------
    ZenoTimeDivergenceError
        For Mittag-Leffler renewals with ``alpha < 1`` (``t_Z`` is infinite).
    ArithmeticError
        If the three evaluations are not consistent to 0.5 %.
    """
    if isinstance(renewal, MittagLeffler) and renewal.alpha < 1:
        raise ZenoTimeDivergenceError(
            "heavy-tailed renewals give p(t) ~ t^-alpha; the Zeno time integral diverges"
        )
    p = _two_level_params(model)
    if isinstance(renewal, (Poisson, MittagLeffler)) and p is not None:
        return closed_forms.zeno_time_poisson(p, renewal.rate, model.relaxation)
    v = p.v if p is not None else max(float(np.max(np.abs(model.hamiltonian))), 1.0)
    eps = np.array(ZENO_EPS) * v
    vals = survival_laplace(eps + 0j, model, renewal).real
    r1 = 2.0 * vals[1] - vals[0]
    r2 = 2.0 * vals[2] - vals[1]
    tz = (4.0 * r2 - r1) / 3.0
    spread = float(np.max(np.abs(vals - tz)) / abs(tz))
    if not np.isfinite(tz) or tz <= 0 or spread > ZENO_CONSISTENCY:
        raise ArithmeticError(f"small-eps limit not converged (relative spread {spread:.3g})")
    return float(tz)


@dataclass(frozen=True, eq=False)
class ZenoScan:
    w_r_grid: np.ndarray
    t_Z_values: np.ndarray
    argmin_w_r: float

    def __post_init__(self):
        if np.any(np.asarray(self.t_Z_values) <= 0):
            raise ValueError("Zeno times must be positive")

    def spans_minimum(self, margin: float = 1e-3) -> bool:
        """Interior minimum with both grid ends above it by more than ``margin`` (relative)."""
        tz = np.asarray(self.t_Z_values)
        i = int(np.argmin(tz))
        return 0 < i < tz.size - 1 and min(tz[0], tz[-1]) > tz[i] * (1.0 + margin)


def zeno_scan(p: TwoLevelParams, w_r_grid, r: Optional[RelaxationParams] = None) -> ZenoScan:
    """Poissonian Zeno time over a grid of measurement rates."""
    grid = np.asarray(w_r_grid, dtype=float)
    if grid.ndim != 1 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("w_r grid must be positive and strictly increasing")
    tz = np.array([closed_forms.zeno_time_poisson(p, w, r) for w in grid])
    return ZenoScan(grid, tz, float(grid[np.argmin(tz)]))


# ---------------------------------------------------------------------------
# fits


@dataclass(frozen=True)
class TailFit:
    exponent: float
    amplitude: float
    fit_residual: float
    n_blocks: int


def oscillation_block_width(curve_or_meta) -> float:
    """``pi / E`` with ``E = v sqrt(epsilon_bar^2 + 1)`` from curve metadata."""
    meta = curve_or_meta.metadata if isinstance(curve_or_meta, SurvivalCurve) else curve_or_meta
    sysm = meta.get("system", {})
    if "epsilon" not in sysm or "v" not in sysm:
        raise ValueError("metadata lacks the two-level parameters needed for the block width")
    return math.pi / math.hypot(sysm["epsilon"], sysm["v"])


def block_grid(window: Sequence[float], width: float, n_blocks: Optional[int] = None,
               points_per_block: int = 9):
    """Time grid covering blocks of ``width`` aligned to ``window[0] + k * width``.

    Every block in the window is sampled uniformly (both ends included) unless
    ``n_blocks`` asks for a log-spaced subset.
    """
    t0, t1 = map(float, window)
    n_total = int(math.floor((t1 - t0) / width + 1e-9))
    if n_total < 3:
        raise ValueError("window shorter than 3 blocks")
    if n_blocks is None or n_total <= n_blocks:
        step = width / (points_per_block - 1)
        return t0 + step * np.arange(n_total * (points_per_block - 1) + 1)
    starts = np.geomspace(t0, t1 - width, n_blocks)
    ks = np.unique(np.floor((starts - t0) / width).astype(int))
    u = np.linspace(0.0, 1.0, points_per_block)
    return np.unique((t0 + width * (ks[:, None] + u[None, :])).ravel())


def _block_edges(t, t0, width, n_total):
    # blocks resolved by the grid: enough samples and no gap wider than a quarter block
    edges = t0 + width * np.arange(n_total + 1)
    lo = np.searchsorted(t, edges[:-1] - 1e-9 * width, side="left")
    hi = np.searchsorted(t, edges[1:] + 1e-9 * width, side="right")
    ok = np.zeros(n_total, dtype=bool)
    for b in range(n_total):
        if hi[b] - lo[b] < MIN_BLOCK_POINTS:
            continue
        tb = t[lo[b] : hi[b]]
        gap = max(tb[0] - edges[b], edges[b + 1] - tb[-1], float(np.max(np.diff(tb))))
        ok[b] = gap <= 0.25 * width * (1.0 + 1e-9)
    return edges[:-1][ok], edges[1:][ok]


def tail_exponent_fit(curve: SurvivalCurve, window: Sequence[float], block_width: Optional[float] = None) -> TailFit:
    """Power-law exponent of the long-time survival ``p ~ A t^-a``.

    The curve is averaged (trapezoid rule) over consecutive blocks of width
    ``block_width`` (default ``pi / E``, one period of the ``cos(2 E t)``
    modulation) aligned to ``window[0]``; ``log`` of the block means is then
    fit against ``log t``, one point per block.  Each block is represented by
    the time at which the fitted power law takes its block-mean value,
    iterated to self-consistency, so an exact power law is recovered exactly.

    Raises
    ------
    ValueError
        If values in the window are non-positive, the window is shorter than
        three blocks, or fewer than three blocks are resolved by the grid.
    """
    width = oscillation_block_width(curve) if block_width is None else float(block_width)
    t0, t1 = map(float, window)
    if t1 - t0 < 3.0 * width:
        raise ValueError(f"window [{t0}, {t1}] shorter than 3 oscillation periods ({3 * width:.3g})")
    sel = (curve.times >= t0 - 1e-9 * width) & (curve.times <= t1 + 1e-9 * width)
    t, y = curve.times[sel], curve.values[sel]
    if np.any(y <= 0):
        raise ValueError("non-positive survival values in the fit window")
    n_total = int(math.floor((t1 - t0) / width + 1e-9))
    lo, hi = _block_edges(t, t0, width, n_total)
    if lo.size < 3:
        raise ValueError("fewer than 3 blocks in the window are resolved by the time grid")

    # block means from the interpolated cumulative trapezoid integral
    def bmean(vals):
        c = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(t))])
        return (np.interp(hi, t, c) - np.interp(lo, t, c)) / (hi - lo)

    ly = np.log(bmean(y))
    tc = 0.5 * (lo + hi)
    teff = tc
    for _ in range(50):
        slope, icpt = np.polyfit(np.log(teff), ly, 1)
        # block mean of t^slope under the same quadrature rule
        new = bmean(t**slope) ** (1.0 / slope) if slope != 0 else tc
        if np.allclose(new, teff, rtol=1e-14, atol=0):
            break
        teff = new
    resid = ly - (slope * np.log(teff) + icpt)
    return TailFit(float(-slope), float(math.exp(icpt)), float(np.sqrt(np.mean(resid**2))), int(lo.size))


def decay_rate_fit(curve: SurvivalCurve, window: Sequence[float]) -> float:
    """Exponential decay rate: minus the least-squares slope of ``log p`` over ``window``."""
    t0, t1 = map(float, window)
    m = (curve.times >= t0) & (curve.times <= t1)
    if m.sum() < 2:
        raise ValueError("fewer than two grid points in the fit window")
    y = curve.values[m]
    if np.any(y <= 0):
        raise ValueError("non-positive survival values in the fit window")
    return float(-np.polyfit(curve.times[m], np.log(y), 1)[0])
