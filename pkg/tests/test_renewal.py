import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special, stats

from zeno.mittag_leffler import mittag_leffler_neg
from zeno.renewal import (
    BranchPointError,
    Equidistant,
    MittagLeffler,
    NotADensityError,
    Poisson,
    count_probabilities,
    describe,
    from_dict,
    laplace_W,
    pdf_W,
    phi,
    sample_interval,
    sample_intervals,
    stream,
    survival_P,
)

E_ERFC_1 = math.e * math.erfc(1.0)  # 0.427584...


# --- Mittag-Leffler function ------------------------------------------------


def ml_series(alpha, x, terms=4000):
    # oracle: plain power series in extended precision (terms peak near exp(x^(1/alpha)))
    import mpmath

    with mpmath.workdps(80):
        mx, ma = -mpmath.mpf(x), mpmath.mpf(alpha)
        return float(mpmath.fsum(mx**k / mpmath.gamma(ma * k + 1) for k in range(terms)))


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9, 1.0])
def test_ml_at_zero(alpha):
    assert mittag_leffler_neg(alpha, 0.0) == 1.0


def test_ml_exponential_identity():
    x = np.linspace(0, 30, 301)
    np.testing.assert_allclose(mittag_leffler_neg(1.0, x), np.exp(-x), atol=1e-15, rtol=1e-12)
    assert mittag_leffler_neg(1.0, 2.0) == pytest.approx(0.135335283, abs=1e-9)


def test_ml_half_erfc_identity():
    x = np.concatenate([np.linspace(0, 5, 101), np.geomspace(5, 1e4, 50)])
    np.testing.assert_allclose(mittag_leffler_neg(0.5, x), special.erfcx(x), rtol=0, atol=1e-10)
    assert mittag_leffler_neg(0.5, 1.0) == pytest.approx(E_ERFC_1, abs=1e-12)
    assert E_ERFC_1 == pytest.approx(ml_series(0.5, 1.0), abs=1e-14)


@pytest.mark.parametrize("alpha,x", [(a, x) for a in (0.2, 0.35, 0.7, 0.95) for x in (0.3, 1.0, 2.5, 4.0)
                                     if x ** (1 / a) < 150])
def test_ml_against_series_oracle(alpha, x):
    assert mittag_leffler_neg(alpha, x) == pytest.approx(ml_series(alpha, x), abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 1.0))
def test_ml_monotone_in_unit_interval(alpha):
    x = np.geomspace(1e-3, 1e3, 200)
    y = mittag_leffler_neg(alpha, x)
    assert np.all(np.diff(y) <= 1e-14)
    assert np.all((y >= 0) & (y <= 1))
    assert np.all(y[x <= 10] > 0)


def test_ml_close_to_exponential_near_one():
    x = np.linspace(0, 10, 201)
    assert np.max(np.abs(mittag_leffler_neg(0.999, x) - np.exp(-x))) <= 2e-2


def test_ml_domain_errors():
    with pytest.raises(ValueError):
        mittag_leffler_neg(0.0, 1.0)
    with pytest.raises(ValueError):
        mittag_leffler_neg(1.5, 1.0)
    with pytest.raises(ValueError):
        mittag_leffler_neg(0.5, -1.0)


# --- models -----------------------------------------------------------------


def test_model_validation():
    for bad in (lambda: Poisson(0.0), lambda: Equidistant(-1.0), lambda: MittagLeffler(0.0, 1.0),
                lambda: MittagLeffler(1.2, 1.0), lambda: MittagLeffler(0.5, 0.0)):
        with pytest.raises(ValueError):
            bad()


@pytest.mark.parametrize("m", [Poisson(2.0), Equidistant(0.3), MittagLeffler(0.4, 5.0)])
def test_describe_roundtrip(m):
    assert from_dict(describe(m)) == m


def test_pdf_examples():
    assert pdf_W(Poisson(2.0), 0.0) == 2.0
    assert pdf_W(MittagLeffler(1.0, 1.0), 1.0) == pytest.approx(math.exp(-1))
    assert pdf_W(Poisson(1.0), -1.0) == 0.0
    with pytest.raises(NotADensityError, match="survival_P"):
        pdf_W(Equidistant(1.0), 0.5)


def test_ml_pdf_tail_slope():
    t = np.geomspace(1e3, 1e5, 30)
    slope = np.polyfit(np.log(t), np.log(pdf_W(MittagLeffler(0.5, 1.0), t)), 1)[0]
    assert slope == pytest.approx(-1.5, abs=0.02)


def test_ml_pdf_is_minus_derivative_of_survival():
    m = MittagLeffler(0.6, 2.0)
    t = np.linspace(0.2, 5, 25)
    h = 1e-5
    deriv = -(survival_P(m, t + h) - survival_P(m, t - h)) / (2 * h)
    np.testing.assert_allclose(pdf_W(m, t), deriv, rtol=1e-6)


def test_survival_examples():
    for m in (Poisson(3.0), Equidistant(1.0), MittagLeffler(0.3, 2.0)):
        assert survival_P(m, 0.0) == 1.0
    assert survival_P(Equidistant(1.0), 0.999) == 1.0
    assert survival_P(Equidistant(1.0), 1.001) == 0.0
    assert survival_P(MittagLeffler(0.5, 1.0), 1.0) == pytest.approx(0.427584, abs=1e-6)


@pytest.mark.parametrize("m", [Poisson(1.5), Equidistant(0.8), MittagLeffler(0.3, 1.0), MittagLeffler(0.8, 4.0)])
def test_survival_monotone_in_unit_interval(m):
    y = survival_P(m, np.linspace(0, 20, 500))
    assert np.all(np.diff(y) <= 0) and np.all((y >= 0) & (y <= 1))


def test_alpha_one_coincides_with_poisson():
    t = np.linspace(0, 5, 51)
    a, b = MittagLeffler(1.0, 1.7), Poisson(1.7)
    np.testing.assert_allclose(survival_P(a, t), survival_P(b, t), rtol=1e-12)
    np.testing.assert_allclose(pdf_W(a, t), pdf_W(b, t), rtol=1e-12)
    assert phi(a, 0.3 + 1j) == pytest.approx(phi(b, 0.3 + 1j))


def test_phi_examples():
    assert phi(Poisson(2.0), 1.0) == pytest.approx(0.5)
    assert phi(Equidistant(1.0), 1.0) == pytest.approx(math.e - 1)
    assert phi(MittagLeffler(0.5, 4.0), 1.0) == pytest.approx(0.5)
    with pytest.raises(BranchPointError):
        phi(MittagLeffler(0.5, 1.0), 0.0)
    with pytest.raises(ValueError):
        phi(Poisson(1.0), -1.0)


@pytest.mark.parametrize("m", [Poisson(1.3), MittagLeffler(0.5, 1.0), MittagLeffler(0.8, 2.0)])
@pytest.mark.parametrize("k", [0.1, 1.0, 10.0])
def test_phi_representation_by_quadrature(m, k):
    eps = k * m.rate
    # substitution t = u^(1/a) removes the integrable t^(a-1) singularity of the density
    a = getattr(m, "alpha", 1.0)

    def f(u):
        t = u ** (1.0 / a)
        return pdf_W(m, t) * np.exp(-eps * t) * t ** (1.0 - a) / a

    head = integrate.quad(f, 0.0, 1.0, epsabs=0, epsrel=1e-11, limit=200)[0]
    tail = integrate.quad(lambda t: pdf_W(m, t) * np.exp(-eps * t), 1.0, np.inf, epsabs=0, epsrel=1e-11,
                          limit=400)[0]
    assert head + tail == pytest.approx(laplace_W(m, eps).real, rel=1e-6)


# --- sampling ---------------------------------------------------------------


def test_stream_is_deterministic_and_independent():
    a = stream(42, 0).random(5)
    np.testing.assert_array_equal(a, stream(42, 0).random(5))
    assert not np.allclose(a, stream(42, 1).random(5))
    assert not np.allclose(a, stream(43, 0).random(5))


def test_equidistant_sampler():
    rng = stream(0, 0)
    assert sample_interval(Equidistant(0.7), rng) == 0.7
    np.testing.assert_array_equal(sample_intervals(Equidistant(0.7), rng, 10), 0.7)


def test_poisson_sample_mean():
    x = sample_intervals(Poisson(2.0), stream(1, 0), 1_000_000)
    assert abs(x.mean() - 0.5) <= 3 * x.std() / math.sqrt(x.size)


def test_ml_sampler_ks():
    m = MittagLeffler(0.5, 1.0)
    x = sample_intervals(m, stream(7, 0), 100_000)
    d = stats.kstest(x, lambda s: 1.0 - survival_P(m, s)).statistic
    assert d <= 0.005


def test_ml_alpha_one_sampler_matches_poisson():
    x = sample_intervals(MittagLeffler(1.0, 2.0), stream(9, 0), 100_000)
    y = sample_intervals(Poisson(2.0), stream(9, 1), 100_000)
    assert stats.kstest(x, lambda s: 1.0 - np.exp(-2.0 * s)).statistic <= 0.005
    assert stats.kstest(y, lambda s: 1.0 - np.exp(-2.0 * s)).statistic <= 0.005


def test_sample_interval_scalar():
    assert isinstance(sample_interval(MittagLeffler(0.5, 1.0), stream(0, 0)), float)


# --- counting statistics ----------------------------------------------------


def test_counts_poisson_law():
    cd = count_probabilities(Poisson(1.0), 2.0, n_max=30)
    n = np.arange(31)
    np.testing.assert_allclose(cd.probs, 2.0**n * np.exp(-2.0) / special.factorial(n), atol=1e-6)
    assert cd.total == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("m", [Poisson(3.0), MittagLeffler(0.5, 1.0), MittagLeffler(0.3, 4.0)])
def test_counts_zero_is_survival_and_normalized(m):
    cd = count_probabilities(m, 2.0)
    assert cd.probs[0] == pytest.approx(survival_P(m, 2.0), abs=1e-12)
    assert cd.total == pytest.approx(1.0, abs=1e-6)
    assert np.all(cd.probs >= 0)


def test_counts_equidistant_exact():
    cd = count_probabilities(Equidistant(1.0), 2.5)
    assert cd.probs[2] == 1.0 and cd.probs.sum() == 1.0 and cd.tail_mass == 0.0


def test_counts_monte_carlo_method():
    cd = count_probabilities(Poisson(1.0), 2.0, n_max=12, method="monte-carlo", rng=stream(3, 0))
    n = np.arange(13)
    exact = 2.0**n * np.exp(-2.0) / special.factorial(n)
    sigma = np.sqrt(exact * (1 - exact) / 100_000)
    assert np.all(np.abs(cd.probs - exact) <= 3 * sigma)
    assert cd.total == pytest.approx(1.0, abs=1e-12)


def test_counts_errors():
    with pytest.raises(ValueError):
        count_probabilities(Poisson(1.0), 0.0)
    with pytest.raises(ValueError):
        count_probabilities(Poisson(1.0), 1.0, method="nope")
