"""scikit-learn style wrappers around the survival engines.

The estimators take times as ``X`` (shape ``(n,)`` or ``(n, 1)``) and
return survival probabilities from ``predict``.  Physical parameters are
constructor arguments so that ``get_params``/``set_params``/``clone`` work,
which makes parameter sweeps with sklearn tooling straightforward.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .analytic import SurvivalCurve, TailFit, analytic_curve, tail_exponent_fit
from .inversion import InversionSettings
from .liouville import RelaxationParams, SystemModel, TwoLevelParams
from .montecarlo import McConfig, simulate_survival
from .renewal import Equidistant, MittagLeffler, Poisson


def _times(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    X = check_array(X, ensure_min_samples=1)
    if X.shape[1] != 1:
        raise ValueError(f"X must hold a single column of times, got shape {X.shape}")
    t = X[:, 0]
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    return t


def _sorted_call(fn, t):
    # engines need strictly increasing grids; predict accepts any order
    uniq, inv = np.unique(t, return_inverse=True)
    curve = fn(uniq)
    return curve, inv


class _SurvivalBase(BaseEstimator):
    def _build(self):
        params = TwoLevelParams(self.epsilon_bar * self.v, self.v)
        relax = None
        if self.w_d is not None or self.w_p is not None:
            relax = RelaxationParams(self.w_d or 0.0, self.w_p or 0.0)
        model = SystemModel.two_level(params, relax)
        if self.renewal == "poisson":
            ren = Poisson(self.w_r)
        elif self.renewal == "equidistant":
            ren = Equidistant(self.t_r)
        elif self.renewal == "mittag-leffler":
            ren = MittagLeffler(self.alpha, self.w_r)
        else:
            raise ValueError(f"unknown renewal {self.renewal!r}")
        return model, ren

    def fit(self, X=None, y=None):
        """Validate the parameters and build the model; ``X`` and ``y`` are ignored."""
        self.model_, self.renewal_ = self._build()
        return self


class AnalyticSurvival(_SurvivalBase):
    """Survival probability from the Laplace-domain engine.

    Parameters
    ----------
    epsilon_bar, v : float
        Level half-splitting in units of ``v``, and the coupling.
    renewal : {'poisson', 'equidistant', 'mittag-leffler'}
    w_r, alpha, t_r : float
        Renewal parameters (only those of the chosen model are used).
    w_d, w_p : float, optional
        Relaxation rates.
    method : {'supermatrix', 'scalar'}
    n_terms, shift : inversion settings.
    """

    def __init__(self, epsilon_bar=1.0, v=1.0, renewal="poisson", w_r=1.0, alpha=1.0, t_r=1.0,
                 w_d=None, w_p=None, method="supermatrix", n_terms=65, shift=13.0):
        self.epsilon_bar = epsilon_bar
        self.v = v
        self.renewal = renewal
        self.w_r = w_r
        self.alpha = alpha
        self.t_r = t_r
        self.w_d = w_d
        self.w_p = w_p
        self.method = method
        self.n_terms = n_terms
        self.shift = shift

    def curve(self, X) -> SurvivalCurve:
        check_is_fitted(self, "model_")
        t = np.unique(_times(X))
        settings = InversionSettings(n_terms=self.n_terms, shift=self.shift)
        return analytic_curve(self.model_, self.renewal_, t, self.method, settings)

    def predict(self, X):
        check_is_fitted(self, "model_")
        t = _times(X)
        curve, inv = _sorted_call(self.curve, t)
        return curve.values[inv]


class MonteCarloSurvival(_SurvivalBase):
    """Trajectory-averaged survival; ``stderr_`` holds the last standard errors."""

    def __init__(self, epsilon_bar=1.0, v=1.0, renewal="poisson", w_r=1.0, alpha=1.0, t_r=1.0,
                 w_d=None, w_p=None, n_trajectories=100_000, master_seed=0, estimator="product",
                 block_size=4096):
        self.epsilon_bar = epsilon_bar
        self.v = v
        self.renewal = renewal
        self.w_r = w_r
        self.alpha = alpha
        self.t_r = t_r
        self.w_d = w_d
        self.w_p = w_p
        self.n_trajectories = n_trajectories
        self.master_seed = master_seed
        self.estimator = estimator
        self.block_size = block_size

    def curve(self, X) -> SurvivalCurve:
        check_is_fitted(self, "model_")
        cfg = McConfig(self.n_trajectories, self.master_seed, np.unique(_times(X)), self.estimator,
                       self.block_size)
        return simulate_survival(self.model_, self.renewal_, cfg)

    def predict(self, X):
        check_is_fitted(self, "model_")
        curve, inv = _sorted_call(self.curve, _times(X))
        self.stderr_ = curve.stderr[inv]
        return curve.values[inv]


class TailExponentFitter(RegressorMixin, BaseEstimator):
    """Block-averaged power-law fit ``p ~ A t^-a`` to a sampled survival curve.

    Parameters
    ----------
    window : (float, float)
        Fit window in time.
    block_width : float
        Averaging block, normally one period of the oscillating correction
        (``pi / E``).
    """

    def __init__(self, window: Sequence[float] = (1e2, 1e4), block_width: Optional[float] = None):
        self.window = window
        self.block_width = block_width

    def fit(self, X, y):
        t = _times(X)
        y = np.asarray(y, dtype=float).ravel()
        if y.shape != t.shape:
            raise ValueError("X and y lengths differ")
        if self.block_width is None:
            raise ValueError("block_width is required when fitting raw arrays")
        order = np.argsort(t)
        fit: TailFit = tail_exponent_fit(SurvivalCurve(t[order], y[order]), self.window, self.block_width)
        self.exponent_ = fit.exponent
        self.amplitude_ = fit.amplitude
        self.fit_residual_ = fit.fit_residual
        self.n_blocks_ = fit.n_blocks
        return self

    def predict(self, X):
        check_is_fitted(self, "exponent_")
        t = _times(X)
        return self.amplitude_ * t ** (-self.exponent_)
