"""Renewal statistics of measurement times.

Three interval distributions are supported, each characterized by a rate
``w_r`` (or period ``t_r``) and by the auxiliary function ``phi`` with
Laplace-transformed density ``W~(eps) = 1 / (1 + phi(eps))``:

===============  ========================  =====================
model            survival ``P(t)``         ``phi(eps)``
===============  ========================  =====================
Poisson          ``exp(-w_r t)``           ``eps / w_r``
Equidistant      ``1[t < t_r]``            ``exp(t_r eps) - 1``
MittagLeffler    ``E_a(-(w_r t)^a)``       ``(eps / w_r)^a``
===============  ========================  =====================

Random streams are ``numpy.random.Generator`` instances.  Independent
streams are derived from a master seed with :func:`stream`, a counter-based
split through ``SeedSequence(master_seed, spawn_key=(k,))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .mittag_leffler import mittag_leffler_density, mittag_leffler_neg


class NotADensityError(TypeError):
    """Raised when a density is requested for a distribution without one."""


class BranchPointError(ValueError):
    pass


@dataclass(frozen=True)
class Poisson:
    w_r: float

    def __post_init__(self):
        if not self.w_r > 0:
            raise ValueError(f"Poisson rate must be positive, got {self.w_r}")

    @property
    def rate(self):
        return self.w_r


@dataclass(frozen=True)
class Equidistant:
    t_r: float

    def __post_init__(self):
        if not self.t_r > 0:
            raise ValueError(f"measurement period must be positive, got {self.t_r}")

    @property
    def rate(self):
        return 1.0 / self.t_r


@dataclass(frozen=True)
class MittagLeffler:
    alpha: float
    w_r: float

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.w_r > 0:
            raise ValueError(f"rate must be positive, got {self.w_r}")

    @property
    def rate(self):
        return self.w_r


RenewalModel = Union[Poisson, Equidistant, MittagLeffler]


def describe(model: RenewalModel) -> dict:
    """Plain-dict descriptor, the inverse of :func:`from_dict`."""
    if isinstance(model, Poisson):
        return {"kind": "poisson", "w_r": model.w_r}
    if isinstance(model, Equidistant):
        return {"kind": "equidistant", "t_r": model.t_r}
    if isinstance(model, MittagLeffler):
        return {"kind": "mittag-leffler", "alpha": model.alpha, "w_r": model.w_r}
    raise TypeError(f"unknown renewal model {model!r}")


def from_dict(d: dict) -> RenewalModel:
    kind = d["kind"]
    if kind == "poisson":
        return Poisson(float(d["w_r"]))
    if kind == "equidistant":
        return Equidistant(float(d["t_r"]))
    if kind == "mittag-leffler":
        return MittagLeffler(float(d["alpha"]), float(d["w_r"]))
    raise ValueError(f"unknown renewal kind {kind!r}")


def pdf_W(model: RenewalModel, t):
    """Interval density ``W(t)``; zero for ``t < 0``.

    Raises
    ------
    NotADensityError
        For :class:`Equidistant`, whose intervals are a point mass.  Use
        :func:`survival_P` or :func:`sample_interval` instead.
    """
    if isinstance(model, Equidistant):
        raise NotADensityError(
            "equidistant intervals have no density (W is a delta function); "
            "use survival_P or sample_interval"
        )
    t = np.asarray(t, dtype=float)
    if isinstance(model, Poisson):
        out = np.where(t >= 0, model.w_r * np.exp(-model.w_r * np.maximum(t, 0.0)), 0.0)
    else:
        out = np.where(t >= 0, mittag_leffler_density(model.alpha, model.w_r, np.maximum(t, 0.0)), 0.0)
    return out if out.ndim else float(out)


def survival_P(model: RenewalModel, t):
    """Probability ``P(t)`` that an interval exceeds ``t``."""
    t = np.asarray(t, dtype=float)
    tp = np.maximum(t, 0.0)
    if isinstance(model, Poisson):
        out = np.exp(-model.w_r * tp)
    elif isinstance(model, Equidistant):
        out = np.where(tp < model.t_r, 1.0, 0.0)
    else:
        out = mittag_leffler_neg(model.alpha, (model.w_r * tp) ** model.alpha)
    out = np.where(t < 0, 1.0, out)
    return out if out.ndim else float(out)


def phi(model: RenewalModel, eps):
    """Auxiliary function ``phi(eps)`` with ``W~ = 1/(1 + phi)``, principal branch."""
    eps = np.asarray(eps, dtype=complex)
    if np.any(eps.real < 0):
        raise ValueError("phi is defined for Re(eps) >= 0")
    if isinstance(model, Poisson):
        out = eps / model.w_r
    elif isinstance(model, Equidistant):
        out = np.expm1(model.t_r * eps)
    else:
        if model.alpha < 1 and np.any(eps == 0):
            raise BranchPointError("eps = 0 is a branch point of (eps/w_r)**alpha")
        out = (eps / model.w_r) ** model.alpha
    return out if out.ndim else complex(out)


def laplace_W(model: RenewalModel, eps):
    return 1.0 / (1.0 + phi(model, eps))


def stream(master_seed: int, k: int) -> np.random.Generator:
    """Independent random stream number ``k`` derived from ``master_seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(k,))))


def positive_stable(alpha: float, rng: np.random.Generator, size=None):
    """One-sided alpha-stable draws with Laplace transform ``exp(-s**alpha)``.

    Kanter's representation (the totally skewed case of Chambers-Mallows-Stuck):
    with ``U ~ Uniform(0, pi)`` and ``E ~ Exp(1)``,

        S = sin(alpha U) / sin(U)^(1/alpha) * (sin((1 - alpha) U) / E)^((1 - alpha)/alpha)
    """
    if alpha == 1:
        return np.ones(size) if size is not None else 1.0
    u = rng.uniform(0.0, math.pi, size)
    e = rng.standard_exponential(size)
    return (
        np.sin(alpha * u) / np.sin(u) ** (1.0 / alpha)
        * (np.sin((1.0 - alpha) * u) / e) ** ((1.0 - alpha) / alpha)
    )


def sample_intervals(model: RenewalModel, rng: np.random.Generator, size=None):
    """Draw inter-measurement intervals.

    Mittag-Leffler intervals use the product form ``E**(1/alpha) * S / w_r``
    with ``E`` unit exponential and ``S`` positive stable: its Laplace
    transform is ``E[exp(-s^alpha E / w_r^alpha)] = 1 / (1 + (s/w_r)^alpha)``.
    """
    if isinstance(model, Equidistant):
        return np.full(size, model.t_r) if size is not None else model.t_r
    if isinstance(model, Poisson):
        return rng.standard_exponential(size) / model.w_r
    e = rng.standard_exponential(size)
    s = positive_stable(model.alpha, rng, size)
    return e ** (1.0 / model.alpha) * s / model.w_r


def sample_interval(model: RenewalModel, rng: np.random.Generator) -> float:
    return float(sample_intervals(model, rng))


@dataclass(frozen=True)
class CountDistribution:
    """Probabilities of observing ``n`` renewals in ``(0, horizon)``."""

    horizon: float
    probs: np.ndarray
    tail_mass: float
    stderr: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < -1e-12):
            raise ValueError("negative count probability")
        object.__setattr__(self, "probs", p)

    @property
    def total(self) -> float:
        return float(np.sum(self.probs) + self.tail_mass)


def convolution_step(t: float, model: RenewalModel) -> float:
    return min(t, 1.0 / model.rate) / 512.0


def count_probabilities(model: RenewalModel, t: float, n_max: int = 64, method: str = "convolution",
                        rng: np.random.Generator | None = None, n_samples: int = 100_000):
    """Counting statistics ``pi_n(t) = int_0^t P(t - t') W_n(t') dt'``.

    ``method='convolution'`` builds ``W_n`` by repeated trapezoidal
    convolution of ``W`` on a uniform grid; ``method='monte-carlo'`` counts
    renewals in sampled trajectories.  Equidistant renewals are always
    handled exactly: all mass sits on ``n = floor(t / t_r)``.
    """
    if not t > 0:
        raise ValueError("horizon t must be positive")
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    if isinstance(model, Equidistant):
        n = int(math.floor(t / model.t_r))
        probs = np.zeros(n_max + 1)
        if n <= n_max:
            probs[n] = 1.0
        return CountDistribution(t, probs, 0.0 if n <= n_max else 1.0)
    if method == "monte-carlo":
        rng = rng if rng is not None else stream(0, 0)
        counts = count_renewals(model, t, rng, n_samples)
        hist = np.bincount(np.minimum(counts, n_max + 1), minlength=n_max + 2) / n_samples
        se = np.sqrt(hist * (1 - hist) / n_samples)
        return CountDistribution(t, hist[: n_max + 1], float(hist[n_max + 1]), se[: n_max + 1])
    if method != "convolution":
        raise ValueError(f"unknown method {method!r}")
    return _convolution_counts(model, t, n_max)


def _convolution_counts(model, t, n_max, m=None):
    # Stieltjes-trapezoid recursion on the CDF F_n of the n-th renewal time,
    #   F_{n+1}(t) = int_0^t F_n(t - s) dF(s),
    #   pi_n(t)    = int_0^t P(t - s) dF_n(s),
    # using exact cell masses of F so the t^(alpha-1) singularity of the
    # Mittag-Leffler density at the origin needs no special treatment.
    if m is None:
        m = int(math.ceil(t / convolution_step(t, model)))
    h = t / m
    F = 1.0 - survival_P(model, np.arange(m + 1) * h)
    dF = np.diff(F)
    P_rev = 1.0 - F[::-1]
    P_mid = 0.5 * (P_rev[:-1] + P_rev[1:])  # P(t - s) averaged over each cell

    probs = np.zeros(n_max + 1)
    probs[0] = 1.0 - F[-1]
    Fn = F
    for n in range(1, n_max + 1):
        probs[n] = float(np.dot(np.diff(Fn), P_mid))
        G = 0.5 * (Fn[1:] + Fn[:-1])
        Fn = np.concatenate([[0.0], np.convolve(dF, G)[:m]])
    return CountDistribution(t, probs, float(Fn[-1]))


def count_renewals(model: RenewalModel, t: float, rng: np.random.Generator, n_samples: int):
    """Number of renewals in ``(0, t)`` for ``n_samples`` independent trajectories."""
    counts = np.zeros(n_samples, dtype=np.int64)
    elapsed = np.zeros(n_samples)
    active = np.ones(n_samples, dtype=bool)
    while np.any(active):
        idx = np.flatnonzero(active)
        elapsed[idx] += sample_intervals(model, rng, idx.size)
        hit = elapsed[idx] < t
        counts[idx[hit]] += 1
        active[idx[~hit]] = False
    return counts
