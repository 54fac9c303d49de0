"""Mittag-Leffler function ``E_alpha(-x)`` on the negative real axis.

Three representations cover ``x >= 0`` for ``0 < alpha < 1``:

* power series for ``x <= 1``;
* the three-term asymptotic expansion
  ``sum_k (-1)^(k+1) x^-k / Gamma(1 - alpha k)`` once its error estimate
  drops below 1e-10;
* in between, the completely monotone integral

      E_alpha(-x) = sin(pi alpha)/(pi alpha)
                    * int_0^inf exp(-x^(1/alpha) s^(1/alpha)) / (s^2 + 2 s cos(pi alpha) + 1) ds

  obtained from the spectral density of the relaxation function after the
  substitution ``r = s^(1/alpha)``.  The integrand is smooth; for ``alpha``
  near 1 it is a narrow Lorentzian at ``s = -cos(pi alpha)``, which is passed to
  the quadrature as a breakpoint.

``alpha == 1`` is the exponential and bypasses all of the above.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

SERIES_X_MAX = 1.0
SERIES_TOL = 1e-16
SERIES_MAX_TERMS = 400
ASYMPTOTIC_TERMS = 3
ASYMPTOTIC_TOL = 1e-11
# the asymptotic series misses contributions of order exp(-x**(1/alpha))
ASYMPTOTIC_EXP_ARG = 40.0


def _check_alpha(alpha):
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")


def asymptotic_threshold(alpha: float) -> float:
    """Smallest ``x`` at which the asymptotic expansion is used."""
    _check_alpha(alpha)
    # omitted terms x^-k / |Gamma(1 - alpha k)|; some coefficients vanish
    # (alpha k integer), so look a few orders past the truncation
    x_err = 0.0
    for k in range(ASYMPTOTIC_TERMS + 1, ASYMPTOTIC_TERMS + 4):
        c = abs(special.rgamma(1.0 - alpha * k))
        if c > 0:
            x_err = max(x_err, (c / ASYMPTOTIC_TOL) ** (1.0 / k))
    return max(x_err, ASYMPTOTIC_EXP_ARG**alpha, SERIES_X_MAX)


def _series(alpha, x, beta=1.0):
    # sum_k (-x)^k / Gamma(alpha k + beta), scalar x
    total = 0.0
    for k in range(SERIES_MAX_TERMS):
        term = (-x) ** k * special.rgamma(alpha * k + beta)
        total += term
        if k > 2 and abs(term) < SERIES_TOL * max(abs(total), 1e-300):
            break
    return total


def _asymptotic(alpha, x):
    k = np.arange(1, ASYMPTOTIC_TERMS + 1)
    return float(np.sum((-1.0) ** (k + 1) * x ** (-k) * special.rgamma(1.0 - alpha * k)))


def _lorentz_integral(alpha, tau, power):
    # int_0^inf s^(power/alpha) exp(-tau s^(1/alpha)) / (s^2 + 2 s cos(pi alpha) + 1) ds
    # The denominator is (s - peak)^2 + width^2; its core is integrated in
    # theta with s = peak + width tan(theta), which removes the Lorentzian.
    inv = 1.0 / alpha
    peak = -math.cos(math.pi * alpha)
    width = math.sin(math.pi * alpha)

    def g(s):
        return s ** (power * inv) * math.exp(-tau * s**inv)

    def f(s):
        return g(s) / ((s - peak) ** 2 + width * width)

    def f_theta(theta):
        return g(peak + width * math.tan(theta)) / width

    kw = dict(epsabs=0.0, epsrel=1e-12, limit=400)
    # the exponential factor is below 1e-300 past s_cut
    s_cut = (700.0 / tau) ** alpha if tau > 0 else math.inf
    lo = max(peak - 10.0 * width, 0.0)
    hi = min(peak + 10.0 * width, s_cut)
    total = 0.0
    if hi > lo:
        th = [math.atan((lo - peak) / width), math.atan((hi - peak) / width)]
        if lo < peak < hi:
            th.insert(1, 0.0)
        for a, b in zip(th[:-1], th[1:]):
            total += integrate.quad(f_theta, a, b, **kw)[0]
    if lo > 0:
        total += integrate.quad(f, 0.0, lo, **kw)[0]
    if hi < s_cut:
        edges = [hi] + ([1.0] if hi < 1.0 < s_cut else []) + [s_cut]
        for a, b in zip(edges[:-1], edges[1:]):
            total += integrate.quad(f, a, b, **kw)[0]
    return total


def _integral(alpha, x):
    tau = x ** (1.0 / alpha)
    s = math.sin(math.pi * alpha) / (math.pi * alpha)
    return s * _lorentz_integral(alpha, tau, 0)


def mittag_leffler_neg(alpha: float, x):
    """Evaluate ``E_alpha(-x)`` for ``0 < alpha <= 1`` and ``x >= 0``.

    Parameters
    ----------
    alpha : float
        Order in ``(0, 1]``.
    x : float or array_like
        Non-negative arguments.

    Returns
    -------
    float or ndarray
        Values in ``(0, 1]``, same shape as ``x``.
    """
    _check_alpha(alpha)
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)) or np.any(xa < 0):
        raise ValueError("x must be finite and non-negative")
    if alpha == 1:
        out = np.exp(-xa)
        return out if out.ndim else float(out)
    x_asym = asymptotic_threshold(alpha)
    flat = xa.ravel()
    out = np.empty_like(flat)
    for i, xi in enumerate(flat):
        if xi <= SERIES_X_MAX:
            out[i] = _series(alpha, xi)
        elif xi >= x_asym:
            out[i] = _asymptotic(alpha, xi)
        else:
            out[i] = _integral(alpha, xi)
    out = out.reshape(xa.shape)
    return out if out.ndim else float(out)


def mittag_leffler_density(alpha: float, rate: float, t):
    """``W(t) = -d/dt E_alpha(-(rate t)^alpha)`` for ``t > 0``.

    Same three regions as :func:`mittag_leffler_neg`, applied to the
    term-by-term derivative of each representation.
    """
    _check_alpha(alpha)
    ta = np.asarray(t, dtype=float)
    if alpha == 1:
        out = np.where(ta >= 0, rate * np.exp(-rate * np.maximum(ta, 0.0)), 0.0)
        return out if out.ndim else float(out)
    x_asym = asymptotic_threshold(alpha)
    flat = ta.ravel()
    out = np.zeros_like(flat)
    for i, ti in enumerate(flat):
        if ti <= 0:
            # integrable t^(alpha-1) singularity at the origin
            out[i] = 0.0 if ti < 0 else math.inf
            continue
        u = rate * ti
        x = u**alpha
        if x <= SERIES_X_MAX:
            # W = rate * u^(alpha-1) * E_{alpha,alpha}(-x)
            out[i] = rate * u ** (alpha - 1.0) * _series(alpha, x, beta=alpha)
        elif x >= x_asym:
            k = np.arange(1, ASYMPTOTIC_TERMS + 1)
            terms = (-1.0) ** (k + 1) * k * x ** (-k - 1.0) * special.rgamma(1.0 - alpha * k)
            out[i] = alpha * rate * u ** (alpha - 1.0) * float(np.sum(terms))
        else:
            s = math.sin(math.pi * alpha) / (math.pi * alpha)
            out[i] = rate * s * _lorentz_integral(alpha, u, 1)
    out = out.reshape(ta.shape)
    return out if out.ndim else float(out)
