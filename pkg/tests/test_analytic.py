import math
import warnings

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from scipy import integrate

from zeno import closed_forms
from zeno.analytic import (
    InversionClipWarning,
    LaplaceSurvival,
    SurvivalCurve,
    ZenoScan,
    ZenoTimeDivergenceError,
    analytic_curve,
    anomalous_closed_survival,
    averaged_propagator_laplace,
    block_grid,
    decay_rate_fit,
    equidistant_survival,
    invert_laplace,
    poisson_closed_survival,
    relaxed_anomalous_closed_survival,
    scalar_survival,
    supermatrix_survival,
    survival_laplace,
    tail_exponent_fit,
    zeno_scan,
    zeno_time,
)
from zeno.closed_forms import derived_rates
from zeno.inversion import InversionSettings, invert
from zeno.liouville import RelaxationParams, SpectralSurvival, SystemModel, TwoLevelParams, generator, projector_superops
from zeno.mittag_leffler import mittag_leffler_neg
from zeno.renewal import Equidistant, MittagLeffler, Poisson


def two_level(eb, v=1.0, relax=None):
    return SystemModel.two_level(TwoLevelParams(eb * v, v), relax)


# --- inversion --------------------------------------------------------------


def test_invert_constant():
    t = np.geomspace(0.1, 100, 40)
    np.testing.assert_allclose(invert(lambda e: 1.0 / e, t), 1.0, atol=1e-8)


def test_invert_exponential():
    t = np.geomspace(0.1, 100, 40)
    np.testing.assert_allclose(invert(lambda e: 1.0 / (e + 2.0), t), np.exp(-2 * t), atol=1e-8)


def test_invert_mittag_leffler_pair():
    t = np.linspace(0.1, 50, 60)
    vals = invert(lambda e: e**-0.5 / (e**0.5 + 1.0), t)
    np.testing.assert_allclose(vals, mittag_leffler_neg(0.5, np.sqrt(t)), atol=1e-6)


def test_invert_oscillating_pair_with_frequency_hint():
    t = np.linspace(0.1, 30, 50)
    vals = invert(lambda e: e / (e * e + 9.0), t, frequency=3.0)
    np.testing.assert_allclose(vals, np.cos(3 * t), atol=1e-8)


@pytest.mark.parametrize("grouping", ["point", "decade", "grid"])
def test_invert_groupings(grouping):
    # one period for the whole grid loses accuracy far below max(t); keep to one decade
    t = np.geomspace(1.0, 10, 15)
    vals = invert(lambda e: 1.0 / (e + 0.5), t, InversionSettings(grouping=grouping))
    np.testing.assert_allclose(vals, np.exp(-0.5 * t), atol=1e-6)


def test_invert_error_estimate_and_validation():
    t = np.array([0.5, 1.0])
    vals, err = invert(lambda e: 1.0 / (e + 1.0), t, return_error=True)
    assert err.shape == t.shape and np.all(err < 1e-6)
    with pytest.raises(ValueError):
        invert(lambda e: 1.0 / e, np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        InversionSettings(n_terms=64)


def test_invert_laplace_initial_value_and_clip_warning():
    f = LaplaceSurvival(lambda e: 1.0 / (e + 1.0), rate_scale=1.0)
    c = invert_laplace(f, np.array([0.0, 1.0]))
    assert c.values[0] == pytest.approx(1.0, abs=1e-8)
    assert c.values[1] == pytest.approx(math.exp(-1), abs=1e-8)
    g = LaplaceSurvival(lambda e: 2.0 / e)
    with pytest.warns(InversionClipWarning):
        c = invert_laplace(g, np.array([1.0]))
    assert c.values[0] == 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        invert_laplace(g, np.array([1.0]), probability=False)


# --- averaged propagator ----------------------------------------------------


@pytest.mark.parametrize("eb,w", [(0.0, 0.5), (1.0, 2.0), (2.5, 10.0)])
def test_poisson_resolvent_identity(eb, w):
    m = two_level(eb, relax=RelaxationParams(0.2, 0.7))
    L = generator(m)
    _, Q = projector_superops(0, 2)
    for eps in (0.1, 1.0 + 2.0j, 10.0):
        U = averaged_propagator_laplace(eps, m, Poisson(w))
        direct = np.linalg.inv(eps * np.eye(4) + L + w * Q)
        assert np.max(np.abs(U - direct)) <= 1e-10


@pytest.mark.parametrize("renewal,k", [(Poisson(2.0), 1e6), (Equidistant(0.5), 1e6), (MittagLeffler(0.5, 2.0), 1e9)])
def test_propagator_short_time_limit(renewal, k):
    # heavy tails approach I/eps only like (w_r/eps)^alpha, hence the larger factor
    eps = k * 10.0
    U = averaged_propagator_laplace(eps, two_level(1.0), renewal)
    assert np.max(np.abs(eps * U - np.eye(4))) <= 1e-4


def test_propagator_batched_shape_and_domain():
    U = averaged_propagator_laplace(np.array([0.5, 1.0, 2.0]), two_level(1.0), Poisson(1.0))
    assert U.shape == (3, 4, 4)
    with pytest.raises(ValueError):
        averaged_propagator_laplace(-1.0, two_level(1.0), Poisson(1.0))


def test_equidistant_matches_product_formula_transform():
    m, r = two_level(0.7), Equidistant(0.5)
    eps = 1.0
    T = 40.0
    pts = list(np.arange(0.5, T, 0.5))
    oracle = integrate.quad(lambda t: math.exp(-eps * t) * equidistant_survival(m, r, np.array([t]))[0],
                            0.0, T, points=pts, limit=2000, epsabs=1e-13)[0]
    assert survival_laplace(eps, m, r).real == pytest.approx(oracle, abs=1e-6)


# --- Laplace-domain survival ------------------------------------------------


@pytest.mark.parametrize("renewal", [Poisson(1.5), Equidistant(0.7), MittagLeffler(0.6, 1.5)])
@pytest.mark.parametrize("method", ["supermatrix", "scalar"])
def test_uncoupled_is_one_over_eps(renewal, method):
    m = SystemModel(np.diag([1.0, -1.0]))
    for eps in (0.3, 2.0):
        assert survival_laplace(eps, m, renewal, method) == pytest.approx(1.0 / eps, rel=1e-8)


@pytest.mark.parametrize("eb", [0.0, 1.0, 2.5])
@pytest.mark.parametrize("w", [0.5, 2.0, 10.0])
@pytest.mark.parametrize("kind", ["poisson", "equidistant", "mittag-leffler"])
def test_dual_path_lattice(eb, w, kind):
    renewal = {"poisson": Poisson(w), "equidistant": Equidistant(1.0 / w),
               "mittag-leffler": MittagLeffler(0.6, w)}[kind]
    eps = np.array([0.1, 1.0, 10.0])
    m = two_level(eb)
    a = survival_laplace(eps, m, renewal, "supermatrix")
    b = survival_laplace(eps, m, renewal, "scalar")
    np.testing.assert_allclose(b, a, rtol=1e-6)


@pytest.mark.parametrize("relax", [None, RelaxationParams(0.3, 1.1)])
def test_poisson_supermatrix_equals_closed_form(relax):
    p = TwoLevelParams(0.8, 1.0)
    eps = np.array([0.05, 0.3, 1.0, 4.0, 0.5 + 3j])
    a = survival_laplace(eps, SystemModel.two_level(p, relax), Poisson(1.7))
    b = closed_forms.survival_laplace_poisson(eps, p, relax, 1.7)
    np.testing.assert_allclose(a, b, rtol=1e-10)


def test_unknown_method():
    with pytest.raises(ValueError):
        survival_laplace(1.0, two_level(1.0), Poisson(1.0), "nope")


def test_scalar_refuses_small_eps_for_heavy_tails():
    with pytest.raises(ValueError, match="supermatrix"):
        survival_laplace(1e-4, two_level(1.0), MittagLeffler(0.5, 1.0), "scalar")


@pytest.mark.parametrize("f", [
    supermatrix_survival(two_level(1.0), Poisson(2.0)),
    supermatrix_survival(two_level(0.5, relax=RelaxationParams(0.5, 1.0)), MittagLeffler(0.4, 3.0)),
    scalar_survival(two_level(0.5), Equidistant(0.4)),
    poisson_closed_survival(TwoLevelParams(1.0, 1.0), 2.0),
    anomalous_closed_survival(TwoLevelParams(0.53, 1.0), 0.3),
    relaxed_anomalous_closed_survival(0.5, 1.0),
])
def test_laplace_survival_invariants(f):
    eps = np.array([0.01, 0.1, 1.0, 10.0]) + 0j
    vals = f(eps)
    assert np.all(np.abs(vals.imag) <= 1e-9 * np.abs(vals.real))
    assert np.all(vals.real > 0)
    assert np.all(eps.real * vals.real <= 1 + 1e-9)
    big = 1e6 * max(f.rate_scale, 1.0)
    assert big * f(np.array([big + 0j]))[0].real == pytest.approx(1.0, abs=1e-4)


# --- closed forms -----------------------------------------------------------


def test_poisson_closed_form_examples():
    p = TwoLevelParams(0.0, 1.0)
    assert closed_forms.survival_laplace_poisson(0.0, p, None, math.sqrt(2)) == pytest.approx(math.sqrt(2))
    weak = TwoLevelParams(0.5, 1e-9)
    assert closed_forms.survival_laplace_poisson(0.7, weak, None, 1.0) == pytest.approx(1 / 0.7, rel=1e-12)
    r = RelaxationParams(0.3, 0.8)
    rates = derived_rates(p, r, w_r=1.5)
    assert closed_forms.survival_laplace_poisson(0.0, p, r, 1.5) == pytest.approx(1 / 1.5 + 1 / rates.w_bar_d0)


def test_anomalous_limit_examples():
    p = TwoLevelParams(0.53, 1.0)
    eps = np.array([0.1, 1.0, 3.0 + 1j])
    np.testing.assert_allclose(closed_forms.survival_laplace_anomalous_limit(eps, p, 1.0), 1 / eps, rtol=1e-14)
    assert closed_forms.survival_laplace_anomalous_limit(1e3, p, 0.3).real == pytest.approx(1e-3, rel=1e-3)
    v = closed_forms.survival_laplace_anomalous_limit(np.array([0.2, 2.0]), p, 0.4)
    assert np.all(v.real > 0) and np.all(v.imag == 0)
    with pytest.raises(ValueError):
        closed_forms.survival_laplace_anomalous_limit(0.0, p, 0.5)
    with pytest.raises(ValueError):
        closed_forms.survival_laplace_anomalous_limit(1.0, p, 1.5)


@pytest.mark.parametrize("eb,alpha", [(0.53, 0.5), (2.5, 0.5), (0.94, 0.7), (0.0, 0.7)])
def test_anomalous_limit_matches_supermatrix_at_large_rate(eb, alpha):
    p = TwoLevelParams(eb, 1.0)
    eps = np.array([0.1, 1.0, 5.0])
    a = survival_laplace(eps, SystemModel.two_level(p), MittagLeffler(alpha, 1e6))
    b = closed_forms.survival_laplace_anomalous_limit(eps, p, alpha)
    np.testing.assert_allclose(a, b, rtol=1e-3)


@pytest.mark.parametrize("eb,alpha", [(0.53, 0.3), (0.94, 0.1)])
def test_anomalous_limit_approached_slowly_for_small_alpha(eb, alpha):
    # corrections decay like w_r^-alpha
    p = TwoLevelParams(eb, 1.0)
    eps = np.array([0.1, 1.0, 5.0])
    b = closed_forms.survival_laplace_anomalous_limit(eps, p, alpha)
    gaps = [np.max(np.abs(survival_laplace(eps, SystemModel.two_level(p), MittagLeffler(alpha, w)) / b - 1))
            for w in (1e6, 1e8, 1e10)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[1] / gaps[0] == pytest.approx(100.0**-alpha, rel=0.5)


def test_half_sum_power_is_real_for_real_eps():
    v = closed_forms.half_sum_power(np.array([0.1, 1.0, 7.0]), 0.37, 2.2)
    assert np.all(v.imag == 0)


def test_relaxed_anomalous_examples():
    assert closed_forms.survival_laplace_relaxed_anomalous(1.0, 1.0, 1.0) == pytest.approx(0.5)
    assert closed_forms.survival_laplace_relaxed_anomalous(1.0, 0.5, 1.0).real == pytest.approx(
        (1 + 3**-0.5) / (1 + 3**0.5), abs=1e-12)
    assert closed_forms.survival_laplace_relaxed_anomalous(0.57735, 0.5, 1.0) is not None
    assert (1 + 3**-0.5) / (1 + 3**0.5) == pytest.approx(0.57735, abs=1e-5)
    assert closed_forms.survival_laplace_relaxed_anomalous(1e8, 0.5, 1.0).real == pytest.approx(1e-8, rel=1e-6)
    with pytest.raises(ValueError):
        closed_forms.survival_laplace_relaxed_anomalous(0.0, 0.5, 1.0)


def test_relaxed_anomalous_alpha_one_inverse():
    # at alpha = 1 the transform reduces to 1/(eps + w)
    w = 0.8
    t = np.linspace(0, 6, 13)
    c = invert_laplace(relaxed_anomalous_closed_survival(1.0, w), t)
    np.testing.assert_allclose(c.values, np.exp(-w * t), atol=1e-8)


def test_derived_rates_examples():
    r = derived_rates(TwoLevelParams(0.0, 1.0))
    assert r.w_bar_rm == pytest.approx(math.sqrt(2)) and r.w_bar_0 is None and r.w_z is None
    assert derived_rates(TwoLevelParams(2.5, 1.0)).w_bar_rm == pytest.approx(math.sqrt(27))
    p = TwoLevelParams(1.0, 1.0)
    wr = np.linspace(0.1, 10, 991)
    w0 = np.array([derived_rates(p, w_r=x).w_bar_0 for x in wr])
    assert wr[np.argmax(w0)] == pytest.approx(2.0, abs=0.01)
    assert w0.max() == pytest.approx(0.5, abs=1e-6)
    wz = derived_rates(TwoLevelParams(0.53, 1.0), alpha=0.97).w_z
    assert wz == pytest.approx(0.5 * math.pi * 0.03 * math.sqrt(1.2809))
    assert wz == pytest.approx(0.0533, abs=1e-4)


def test_derived_rates_relaxation():
    p = TwoLevelParams(0.5, 1.0)
    r = RelaxationParams(0.2, 3.0)
    d = derived_rates(p, r, w_r=1.0)
    assert d.w_bar_d0 == pytest.approx(0.2 + 2 * 4.0 / (16.0 + 1.0))
    assert d.w_tilde_d0 == pytest.approx(0.2 + 2 * 3.0 / (9.0 + 1.0))
    assert derived_rates(TwoLevelParams(0.0, 1.0), RelaxationParams(0.0, 0.0)).w_tilde_d0 is None


# --- time domain ------------------------------------------------------------


def test_inverted_poisson_matches_time_domain_oracle():
    p, w = TwoLevelParams(1.0, 1.0), 2.0
    m = SystemModel.two_level(p)
    _, Q = projector_superops(0, 2)
    A = generator(m) + w * Q
    t = np.linspace(0, 20, 81)
    oracle = np.array([scipy.linalg.expm(-A * x)[0, 0].real for x in t])
    c = invert_laplace(poisson_closed_survival(p, w), t)
    assert np.max(np.abs(c.values - oracle)) <= 1e-6


def test_zeno_limit_increasing_in_rate():
    p = TwoLevelParams(1.0, 1.0)
    vals = [invert_laplace(poisson_closed_survival(p, w), np.array([5.0])).values[0] for w in (10, 100, 1000)]
    assert vals[0] < vals[1] < vals[2] and vals[2] > 0.98


def test_fast_relaxation_plateau_and_decay():
    p, r = TwoLevelParams(0.5, 1.0), RelaxationParams(50.0, 50.0)
    t = np.linspace(0.5, 12, 47)
    c = invert_laplace(poisson_closed_survival(p, 1.0, r), t)
    assert c.values[0] == pytest.approx(0.5 * math.exp(-0.25), abs=0.03)
    rate = decay_rate_fit(c, (4.0, 12.0))
    assert rate == pytest.approx(0.5, rel=0.05)


def test_near_poisson_anomalous_rate_is_reported():
    # the mid-window rate is a diagnostic here; its comparison with w_z is an acceptance criterion
    p = TwoLevelParams(0.53, 1.0)
    t = np.linspace(5, 60, 56)
    c = invert_laplace(anomalous_closed_survival(p, 0.97), t)
    rate = decay_rate_fit(c, (10.0, 40.0))
    assert 0 < rate < 1


def test_analytic_curve_equidistant_uses_exact_product():
    m, r = two_level(1.0), Equidistant(0.5)
    t = np.linspace(0, 5, 11)
    c = analytic_curve(m, r, t)
    p1 = SpectralSurvival(m)
    n = np.floor(t / 0.5)
    np.testing.assert_allclose(c.values, p1(t - 0.5 * n) * p1(0.5) ** n, rtol=1e-14)
    assert c.metadata["method"] == "equidistant-product"


def test_analytic_curve_methods_agree():
    m, r = two_level(1.0), Poisson(2.0)
    t = np.linspace(0, 8, 17)
    a = analytic_curve(m, r, t, "supermatrix")
    b = analytic_curve(m, r, t, "scalar")
    np.testing.assert_allclose(a.values, b.values, atol=1e-6)
    a.check()


# --- Zeno time --------------------------------------------------------------


def test_zeno_time_examples():
    m = two_level(0.0)
    assert zeno_time(m, Poisson(math.sqrt(2))) == pytest.approx(math.sqrt(2))
    assert zeno_time(m, Poisson(1e-3)) == pytest.approx(1e3, rel=0.02)
    assert zeno_time(m, Poisson(1e3)) == pytest.approx(1e3 / 2, rel=0.01)
    with pytest.raises(ZenoTimeDivergenceError):
        zeno_time(m, MittagLeffler(0.5, 1.0))


def test_zeno_time_is_minimal_at_predicted_rate():
    scan = zeno_scan(TwoLevelParams(0.0, 1.0), np.geomspace(0.1, 20, 2001))
    assert scan.argmin_w_r == pytest.approx(math.sqrt(2), rel=5e-3)
    assert scan.spans_minimum()


def test_zeno_time_numerical_limit_equidistant():
    # Richardson path against quadrature of the exact product
    m, r = two_level(0.5), Equidistant(0.3)
    tz = zeno_time(m, r)
    p1 = SpectralSurvival(m)
    q = float(p1(np.array([0.3]))[0])
    cell = integrate.quad(lambda s: p1(np.array([s]))[0], 0, 0.3, epsabs=1e-13)[0]
    assert tz == pytest.approx(cell / (1 - q), rel=5e-3)


def test_zeno_scan_validation():
    with pytest.raises(ValueError):
        zeno_scan(TwoLevelParams(0.0, 1.0), [1.0, 0.5])
    with pytest.raises(ValueError):
        ZenoScan(np.array([1.0]), np.array([0.0]), 1.0)
    mono = zeno_scan(TwoLevelParams(0.0, 1.0), np.geomspace(5, 50, 20))
    assert not mono.spans_minimum()


# --- tail fits --------------------------------------------------------------


def synthetic(t, y, eb=0.0):
    return SurvivalCurve(t, y, metadata={"system": {"epsilon": eb, "v": 1.0}})


def test_tail_fit_exact_power_law():
    t = block_grid((1e2, 1e3), math.pi)
    fit = tail_exponent_fit(synthetic(t, t**-0.5), (1e2, 1e3))
    assert fit.exponent == pytest.approx(0.5, abs=1e-6)
    assert fit.amplitude == pytest.approx(1.0, rel=1e-5)


def test_tail_fit_suppresses_oscillation():
    t = block_grid((1e2, 1e4), math.pi, n_blocks=200)
    y = (1 + 0.3 * np.cos(2 * t)) * t**-0.3
    fit = tail_exponent_fit(synthetic(t, y), (1e2, 1e4), block_width=math.pi)
    assert fit.exponent == pytest.approx(0.3, abs=0.01)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 1.5), st.floats(0.1, 10))
def test_tail_fit_recovers_any_power_law(a, amp):
    t = block_grid((10, 200), 1.0)
    fit = tail_exponent_fit(synthetic(t, amp * t**-a), (10, 200), block_width=1.0)
    assert fit.exponent == pytest.approx(a, abs=1e-6)
    assert fit.amplitude == pytest.approx(amp, rel=1e-5)


def test_tail_fit_inverted_anomalous_limit():
    p = TwoLevelParams(0.53, 1.0)
    w = math.pi / p.energy
    t = block_grid((1e2, 1e4), w, n_blocks=60)
    c = invert_laplace(anomalous_closed_survival(p, 0.3), t, InversionSettings(grouping="decade"))
    fit = tail_exponent_fit(c, (1e2, 1e4))
    assert fit.exponent == pytest.approx(0.3, abs=0.05)


def bromwich_oracle(F, t, singular_y, y_max=2000.0):
    # direct quadrature on Re eps = 1/t of F(eps) - 1/(eps + 1), plus exp(-t)
    c = 1.0 / t

    def G(y):
        e = c + 1j * y
        return F(e) - 1.0 / (e + 1.0)

    near = np.geomspace(c * 1e-3, 0.5, 60)
    br = {0.0, *near, *np.linspace(max(singular_y) + 0.5, y_max, 400)}
    for y0 in singular_y:
        br |= {*(y0 - near), *(y0 + near)}
    br = sorted(b for b in br if 0 <= b <= y_max)
    s = 0.0
    for lo, hi in zip(br[:-1], br[1:]):
        s += integrate.quad(lambda y: G(y).real, lo, hi, weight="cos", wvar=t, limit=500)[0]
        s -= integrate.quad(lambda y: G(y).imag, lo, hi, weight="sin", wvar=t, limit=500)[0]
    return math.exp(c * t) / math.pi * s + math.exp(-t)


@pytest.mark.parametrize("t", [100.0, 1000.0])
def test_inverted_anomalous_limit_matches_bromwich_quadrature(t):
    # slowly decaying oscillation at 2E: an independent oracle for the tail-fit input
    p = TwoLevelParams(0.94, 1.0)
    f = anomalous_closed_survival(p, 0.1)
    ref = bromwich_oracle(lambda e: closed_forms.survival_laplace_anomalous_limit(e, p, 0.1), t, [0.0, 2 * p.energy])
    assert invert_laplace(f, np.array([t])).values[0] == pytest.approx(ref, abs=1e-7)


def test_tail_fit_errors():
    t = block_grid((1, 20), 1.0)
    with pytest.raises(ValueError, match="shorter"):
        tail_exponent_fit(synthetic(t, t**-0.5), (1, 2.5), block_width=1.0)
    with pytest.raises(ValueError, match="non-positive"):
        tail_exponent_fit(synthetic(t, -(t**-0.5)), (1, 20), block_width=1.0)
    with pytest.raises(ValueError):
        tail_exponent_fit(SurvivalCurve(t, t**-0.5), (1, 20))


# --- SurvivalCurve ----------------------------------------------------------


def test_survival_curve_validation():
    with pytest.raises(ValueError):
        SurvivalCurve(np.array([0.0, 1.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        SurvivalCurve(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        SurvivalCurve(np.array([0.0]), np.array([1.0]), provenance="guess")
    with pytest.raises(ValueError):
        SurvivalCurve(np.array([0.0, 1.0]), np.array([1.0, 2.0])).check()
    with pytest.raises(ValueError):
        SurvivalCurve(np.array([0.0, 1.0]), np.array([0.9, 0.5])).check()
    SurvivalCurve(np.array([0.0, 1.0]), np.array([1.0, 1.05]), np.array([0.0, 0.02]), "monte-carlo").check()


def test_survival_curve_roundtrip():
    c = SurvivalCurve(np.array([0.0, 1.0]), np.array([1.0, 0.5]), np.array([0.0, 0.1]), "monte-carlo",
                      {"method": "x"}, np.array([0.0, 1e-9]))
    d = SurvivalCurve.from_dict(c.to_dict())
    assert d.to_dict() == c.to_dict() and len(d) == 2
