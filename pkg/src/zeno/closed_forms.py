"""Closed-form Laplace-domain survival for the two-level system.

All functions are vectorized over the Laplace argument ``eps`` and use the
principal branch for complex powers.  Symbols: ``epsilon`` is the level
half-splitting, ``v`` the coupling, ``w_r`` the measurement rate,
``w_d``/``w_p`` the population-relaxation and dephasing rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .liouville import RelaxationParams, TwoLevelParams


def _rates(r: Optional[RelaxationParams]):
    return (0.0, 0.0) if r is None else (r.w_d, r.w_p)


def effective_rate(eps, p: TwoLevelParams, r: Optional[RelaxationParams], w_r: float):
    """Measurement- and relaxation-induced transition rate ``w_bar_d(eps)``.

    ``w_d + 2 (eps + w_rp) v^2 / ((eps + w_rp)^2 + 4 epsilon^2)`` with
    ``w_rp = w_r + w_p``; without relaxation this is ``w_bar(eps)``.
    """
    w_d, w_p = _rates(r)
    s = eps + w_r + w_p
    return w_d + 2.0 * s * p.v**2 / (s * s + 4.0 * p.epsilon**2)


def survival_laplace_poisson(eps, p: TwoLevelParams, r: Optional[RelaxationParams], w_r: float):
    """Laplace-transformed survival under Poissonian measurements.

    ``(eps + w_r + wb) / (eps^2 + eps (w_r + 2 wb) + w_r wb)`` with
    ``wb = effective_rate(eps)``.  ``eps = 0`` is allowed and gives the Zeno
    time ``1/w_r + 1/wb(0)``.
    """
    eps = np.asarray(eps, dtype=complex if np.iscomplexobj(eps) else float)
    wb = effective_rate(eps, p, r, w_r)
    num = eps + w_r + wb
    den = eps * eps + eps * (w_r + 2.0 * wb) + w_r * wb
    out = num / den
    return out if out.ndim else out.item()


def half_sum_power(eps, beta, omega):
    """``((eps + i omega)^beta + (eps - i omega)^beta) / 2`` (real for real eps)."""
    eps = np.asarray(eps, dtype=complex)
    return 0.5 * ((eps + 1j * omega) ** beta + (eps - 1j * omega) ** beta)


def survival_laplace_anomalous_limit(eps, p: TwoLevelParams, alpha: float):
    """Large-rate limit of the survival transform for Mittag-Leffler renewals.

    ``[(2 e^2 + 1) eps^(a-1) + Om^(a-1)] / [(2 e^2 + 1) eps^a + Om^a]`` with
    ``e = epsilon / v`` and ``Om^b`` the half-sum power at ``2 v sqrt(e^2 + 1)``.
    Independent of the measurement rate.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    eps = np.asarray(eps, dtype=complex)
    omega = 2.0 * p.v * math.sqrt(p.epsilon_bar**2 + 1.0)
    if np.any(eps == 0) or np.any((eps.real == 0) & (np.abs(np.abs(eps.imag) - omega) == 0)):
        raise ValueError("eps lies on a branch point (0 or +-2iE)")
    g = 2.0 * p.epsilon_bar**2 + 1.0
    num = g * eps ** (alpha - 1.0) + half_sum_power(eps, alpha - 1.0, omega)
    den = g * eps**alpha + half_sum_power(eps, alpha, omega)
    out = num / den
    return out if out.ndim else complex(out)


def survival_laplace_relaxed_anomalous(eps, alpha: float, w_tilde_d0: float):
    """Fast-dephasing, large-rate limit with Mittag-Leffler renewals.

    ``[eps^(a-1) + (eps + 2 w)^(a-1)] / [eps^a + (eps + 2 w)^a]``.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    eps = np.asarray(eps, dtype=complex)
    if np.any(eps == 0):
        raise ValueError("eps = 0 is a branch point")
    b = eps + 2.0 * w_tilde_d0
    out = (eps ** (alpha - 1.0) + b ** (alpha - 1.0)) / (eps**alpha + b**alpha)
    return out if out.ndim else complex(out)


@dataclass(frozen=True)
class DerivedRates:
    """Characteristic rates; a field is ``None`` when it does not apply.

    ``w_bar_0``: exponential decay rate for fast Poissonian measurements.
    ``w_bar_rm``: dimensionless rate minimizing the Zeno time.
    ``w_bar_d0``: decay rate with relaxation (``w_bar_d`` at eps=0).
    ``w_tilde_d0``: fast-dephasing population transfer rate (``None`` when
    ``w_p = 0`` and ``epsilon = 0``).
    ``w_z``: decay rate for nearly Poissonian anomalous statistics.
    """

    w_bar_0: Optional[float] = None
    w_bar_rm: Optional[float] = None
    w_bar_d0: Optional[float] = None
    w_tilde_d0: Optional[float] = None
    w_z: Optional[float] = None


def derived_rates(p: TwoLevelParams, r: Optional[RelaxationParams] = None,
                  w_r: Optional[float] = None, alpha: Optional[float] = None) -> DerivedRates:
    eb = p.epsilon_bar
    out = {"w_bar_rm": math.sqrt(2.0 + 4.0 * eb**2)}
    if w_r is not None:
        out["w_bar_0"] = 2.0 * w_r * p.v**2 / (w_r**2 + 4.0 * p.epsilon**2)
        if r is not None:
            out["w_bar_d0"] = float(effective_rate(0.0, p, r, w_r))
    if r is not None:
        # undefined without dephasing at resonance (coherent exchange, no rate)
        denom = r.w_p**2 + 4.0 * p.epsilon**2
        out["w_tilde_d0"] = r.w_d + 2.0 * p.v**2 * r.w_p / denom if denom > 0 else None
    if alpha is not None:
        if not 0 < alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
        out["w_z"] = 0.5 * math.pi * (1.0 - alpha) * p.v * math.sqrt(eb**2 + 1.0)
    return DerivedRates(**out)


def zeno_time_poisson(p: TwoLevelParams, w_r: float, r: Optional[RelaxationParams] = None) -> float:
    """``t_Z = 1/w_r + 1/w_bar_d(0)`` for Poissonian measurements."""
    return float(1.0 / w_r + 1.0 / effective_rate(0.0, p, r, w_r))
