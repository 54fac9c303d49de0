"""Data behind the two published figures.

Both presets return plain numpy data; plotting and file output live in
:mod:`zeno.plotting` and :mod:`zeno.cli`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import closed_forms
from .analytic import (
    anomalous_closed_survival,
    block_grid,
    decay_rate_fit,
    invert_laplace,
    oscillation_block_width,
    poisson_closed_survival,
    tail_exponent_fit,
)
from .inversion import InversionSettings
from .liouville import TwoLevelParams

FIG1_EPSILON_BARS = (2.5, 1.0, 0.5, 0.25)
FIG1_TAUS = (5.0, 10.0)
FIG1_TAU_R = (1e-2, 1e2)
FIG2A_PAIRS = ((0.94, 0.1), (0.53, 0.3))  # (epsilon_bar, alpha)
FIG2B_PAIRS = ((0.53, 0.92), (0.94, 0.92), (0.53, 0.97), (0.94, 0.97))
FIG2A_WINDOW = (1e2, 1e4)
# empirical amplitude of the reference line t^-alpha / FIG2A_REFERENCE
FIG2A_REFERENCE = 2.3


def survival_vs_tau_r(epsilon_bar: float, tau: float, tau_r) -> np.ndarray:
    """Poissonian ``p(tau | tau_r)`` at fixed ``tau = t v`` (``v = 1``)."""
    p = TwoLevelParams(epsilon_bar, 1.0)
    out = np.empty(len(tau_r))
    for i, tr in enumerate(tau_r):
        out[i] = invert_laplace(poisson_closed_survival(p, 1.0 / tr), [tau]).values[0]
    return out


@dataclass
class Fig1Data:
    tau_r: np.ndarray
    # (tau, epsilon_bar) -> p(tau | tau_r)
    curves: dict = field(default_factory=dict)

    def minimum(self, tau, epsilon_bar) -> float:
        return float(self.tau_r[np.argmin(self.curves[(tau, epsilon_bar)])])

    def non_monotonic(self, tau, epsilon_bar) -> bool:
        d = np.diff(self.curves[(tau, epsilon_bar)])
        return bool(np.any(d > 0) and np.any(d < 0))

    def summary(self) -> dict:
        out = []
        for (tau, eb), _ in self.curves.items():
            w_rm = math.sqrt(2.0 + 4.0 * eb**2)
            out.append({
                "tau": tau,
                "epsilon_bar": eb,
                "tau_r_min": self.minimum(tau, eb),
                "tau_r_predicted": 1.0 / w_rm,
                "non_monotonic": self.non_monotonic(tau, eb),
            })
        return {"curves": out}


def fig1_data(n_points: int = 400, taus=FIG1_TAUS, epsilon_bars=FIG1_EPSILON_BARS) -> Fig1Data:
    tau_r = np.geomspace(*FIG1_TAU_R, n_points)
    data = Fig1Data(tau_r)
    for tau in taus:
        for eb in epsilon_bars:
            data.curves[(tau, eb)] = survival_vs_tau_r(eb, tau, tau_r)
    return data


@dataclass
class Fig2Data:
    # (epsilon_bar, alpha) -> (t, p)
    panel_a: dict = field(default_factory=dict)
    panel_b: dict = field(default_factory=dict)
    fits_a: dict = field(default_factory=dict)
    fits_b: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "tail_fits": [dict(epsilon_bar=eb, alpha=a, **f) for (eb, a), f in self.fits_a.items()],
            "rate_fits": [dict(epsilon_bar=eb, alpha=a, **f) for (eb, a), f in self.fits_b.items()],
        }


def tail_fit_anomalous(epsilon_bar: float, alpha: float, window=FIG2A_WINDOW, n_blocks=None):
    """Block-averaged tail fit of the inverted large-rate anomalous transform."""
    p = TwoLevelParams(epsilon_bar, 1.0)
    f = anomalous_closed_survival(p, alpha)
    width = oscillation_block_width(f.metadata)
    grid = block_grid(window, width, n_blocks)
    curve = invert_laplace(f, grid, InversionSettings(grouping="decade"))
    return tail_exponent_fit(curve, window), curve


def pole_rate(epsilon_bar: float, alpha: float, v: float = 1.0) -> float:
    """Leading decay rate ``pi (1 - alpha) v / (2 sqrt(epsilon_bar^2 + 1))``.

    Zero of the large-rate anomalous denominator to first order in
    ``1 - alpha``; compare ``closed_forms.derived_rates(...).w_z``.
    """
    return 0.5 * math.pi * (1.0 - alpha) * v / math.sqrt(epsilon_bar**2 + 1.0)


def rate_window(epsilon_bar: float, alpha: float):
    wz = closed_forms.derived_rates(TwoLevelParams(epsilon_bar, 1.0), alpha=alpha).w_z
    return 0.5 / wz, 2.0 / wz


def rate_fit_anomalous(epsilon_bar: float, alpha: float, n_points: int = 400):
    p = TwoLevelParams(epsilon_bar, 1.0)
    lo, hi = rate_window(epsilon_bar, alpha)
    t = np.linspace(lo, hi, n_points)
    curve = invert_laplace(anomalous_closed_survival(p, alpha), t)
    return decay_rate_fit(curve, (lo, hi))


def fig2_data(n_points: int = 300) -> Fig2Data:
    data = Fig2Data()
    ta = np.geomspace(1e-1, 1e4, n_points)
    for eb, a in FIG2A_PAIRS:
        f = anomalous_closed_survival(TwoLevelParams(eb, 1.0), a)
        data.panel_a[(eb, a)] = (ta, invert_laplace(f, ta, InversionSettings(grouping="decade")).values)
        fit, _ = tail_fit_anomalous(eb, a)
        data.fits_a[(eb, a)] = {"exponent": fit.exponent, "amplitude": fit.amplitude,
                                "inverse_amplitude": 1.0 / fit.amplitude, "n_blocks": fit.n_blocks}
    t_end = max(rate_window(eb, a)[1] for eb, a in FIG2B_PAIRS)
    tb = np.linspace(0.0, t_end, n_points)
    for eb, a in FIG2B_PAIRS:
        f = anomalous_closed_survival(TwoLevelParams(eb, 1.0), a)
        data.panel_b[(eb, a)] = (tb, invert_laplace(f, tb).values)
        wz = closed_forms.derived_rates(TwoLevelParams(eb, 1.0), alpha=a).w_z
        rate = rate_fit_anomalous(eb, a)
        data.fits_b[(eb, a)] = {"fitted_rate": rate, "w_z": wz, "pole_rate": pole_rate(eb, a),
                                "ratio_to_w_z": rate / wz}
    return data
