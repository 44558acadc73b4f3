import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from conftest import catalog
from levylab.errors import NumericalError, ParameterError
from levylab.exponents import make_catalog_process
from levylab.fourier import (INV_SQRT_2PI, PayoffSpec, TransformSpec, fourier_transform, gaussian_payoff,
                             gaussian_payoff_price_gbm, gaussian_transform, inverse_transform,
                             payoff_price_from_distribution, replicate_payoff, smoothed_indicator_payoff,
                             tabulated_payoff, transform_from_payoff)
from levylab.market import MarketModel
from levylab.options import rn_distribution

BM = make_catalog_process("brownian")


def gbm(sigma=0.2, r=0.05, lam=0.5, s0=1.0):
    return MarketModel(BM, r=r, lam=lam, sigma=sigma, s0=s0)


# --------------------------------------------------------------------------- #
# Transforms
# --------------------------------------------------------------------------- #


def test_gaussian_transform_at_zero():
    assert gaussian_transform(0.0, 1.0)(0.0) == pytest.approx(0.398942, abs=1e-6)
    assert gaussian_transform(0.0, 1.0)(0.0).real == pytest.approx(INV_SQRT_2PI, abs=1e-15)


@pytest.mark.parametrize("a,u", [(0.0, 1.0), (0.3, 0.5), (-1.0, 2.0)])
def test_gaussian_closed_form_matches_quadrature(a, u):
    q = np.array([-3.0, -0.7, 0.0, 0.4, 2.5])
    num = fourier_transform(gaussian_payoff(a, u), q)
    assert np.max(np.abs(num - gaussian_transform(a, u)(q))) < 1e-8


def test_zero_payoff_has_zero_transform():
    zero = PayoffSpec(lambda x: np.zeros_like(np.asarray(x, dtype=float)), support=None, name="zero")
    assert np.all(fourier_transform(zero, np.array([0.0, 1.0])) == 0)
    assert transform_from_payoff(zero)(1.0) == 0


def test_non_integrable_payoff_rejected():
    const = PayoffSpec(lambda x: np.ones_like(np.asarray(x, dtype=float)), declared_integrable=False, name="one")
    with pytest.raises(ParameterError):
        fourier_transform(const, 0.0)
    with pytest.raises(ParameterError):
        transform_from_payoff(const)


def test_goodness_probe():
    # oscillation makes the derivatives grow although the payoff decays
    with pytest.raises(ParameterError):
        PayoffSpec(lambda x: np.exp(-np.abs(x) / 10.0) * np.sin(np.asarray(x) ** 2), declared_good=True)
    PayoffSpec(lambda x: np.exp(-np.asarray(x) ** 2), declared_good=True)


def test_variance_must_be_positive():
    for bad in (0.0, -1.0):
        with pytest.raises(ParameterError):
            gaussian_payoff(0.0, bad)
        with pytest.raises(ParameterError):
            gaussian_transform(0.0, bad)
        with pytest.raises(ParameterError):
            gaussian_payoff_price_gbm(0.0, bad, 0.05, 0.2, 1.0)


@given(st.floats(-2, 2), st.floats(0.2, 3.0), st.floats(-3, 3))
def test_transform_is_hermitian(a, u, q):
    g = gaussian_transform(a, u)
    assert g(-q) == pytest.approx(np.conj(g(q)), abs=1e-15)
    num = fourier_transform(gaussian_payoff(a, u), np.array([q, -q]))
    assert num[1] == np.conj(num[0])


@pytest.mark.parametrize("x", [-1.5, 0.0, 0.4, 2.0])
def test_inverse_round_trip(x):
    pay = gaussian_payoff(0.2, 0.7)
    assert inverse_transform(gaussian_transform(0.2, 0.7), x) == pytest.approx(float(pay(x)), abs=1e-9)


def test_inverse_round_trip_indicator():
    pay = smoothed_indicator_payoff(-0.5, 0.5, 0.1)
    g = transform_from_payoff(pay)
    for x in (-0.8, 0.0, 0.45):
        assert inverse_transform(g, x) == pytest.approx(float(pay(x)), abs=1e-7)


def test_trapezoid_transform_matches_closed_form():
    g = transform_from_payoff(gaussian_payoff(0.1, 0.3))
    q = np.linspace(-20, 20, 41)
    assert g.provenance == "quadrature"
    assert np.max(np.abs(g(q) - gaussian_transform(0.1, 0.3)(q))) < 1e-10


def test_tabulated_transform_is_exact_for_triangle():
    # triangle on [-1, 1]: transform is (2 pi)^{-1/2} sinc^2(q/2) in the unnormalised convention
    pay = tabulated_payoff([-1.0, 0.0, 1.0], [0.0, 1.0, 0.0])
    q = np.array([-7.0, -1.0, 0.0, 0.3, 4.0])
    ref = INV_SQRT_2PI * np.sinc(q / (2 * np.pi)) ** 2
    assert np.max(np.abs(fourier_transform(pay, q) - ref)) < 1e-14
    assert np.max(np.abs(transform_from_payoff(pay)(q) - ref)) < 1e-14


def test_tabulated_validation():
    with pytest.raises(ParameterError):
        tabulated_payoff([0.0, 0.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(ParameterError):
        tabulated_payoff([0.0, 1.0], [1.0])


def test_indicator_validation():
    with pytest.raises(ParameterError):
        smoothed_indicator_payoff(1.0, 0.0)
    with pytest.raises(ParameterError):
        smoothed_indicator_payoff(0.0, 1.0, width=0.0)


def test_transform_provenance():
    with pytest.raises(ParameterError):
        TransformSpec(lambda q: q, provenance="guess")


# --------------------------------------------------------------------------- #
# Replication
# --------------------------------------------------------------------------- #


def test_gaussian_closed_form_price_by_quadrature():
    a, u, r, sigma, T = 0.0, 1.0, 0.05, 0.2, 1.0
    b = (r - 0.5 * sigma * sigma) * T
    v = sigma * sigma * T

    def integrand(y):
        return math.exp(-0.5 * (y - a) ** 2 / u) / math.sqrt(2 * math.pi * u) * \
            math.exp(-0.5 * (y - b) ** 2 / v) / math.sqrt(2 * math.pi * v)

    ref = math.exp(-r * T) * integrate.quad(integrand, -20, 20, epsabs=1e-14, epsrel=1e-14)[0]
    assert gaussian_payoff_price_gbm(a, u, r, sigma, T) == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("sigma", [0.1, 0.2, 0.4])
@pytest.mark.parametrize("T", [0.25, 1.0, 3.0])
def test_replication_matches_closed_form(sigma, T):
    rep = replicate_payoff(gbm(sigma), gaussian_transform(0.1, 0.5), T)
    assert rep.price == pytest.approx(gaussian_payoff_price_gbm(0.1, 0.5, 0.05, sigma, T), abs=1e-6)
    assert abs(rep.imag) < 1e-9


def test_replication_with_spot_and_dividend():
    m = MarketModel(BM, r=0.03, lam=0.5, sigma=0.3, s0=1.7, dividend=0.0)
    rep = replicate_payoff(m, gaussian_transform(0.4, 1.0), 2.0)
    assert rep.price == pytest.approx(gaussian_payoff_price_gbm(0.4, 1.0, 0.03, 0.3, 2.0, 1.7), abs=1e-6)


def test_small_variance_limit():
    # u -> 0 and sigma -> 0 leaves the density at the forward log price
    price = gaussian_payoff_price_gbm(0.0, 1e-10, 0.0, 1e-8, 1.0)
    assert price == pytest.approx(1e5 * INV_SQRT_2PI, rel=1e-4)
    assert gaussian_payoff_price_gbm(0.0, 1.0, 0.0, 1e-8, 1.0) == pytest.approx(INV_SQRT_2PI, rel=1e-12)


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_closed_form_depends_on_distance_only(a, shift):
    s0 = math.exp(shift)
    lhs = gaussian_payoff_price_gbm(a + shift, 0.5, 0.02, 0.3, 1.0, s0)
    rhs = gaussian_payoff_price_gbm(a, 0.5, 0.02, 0.3, 1.0, 1.0)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_replication_matches_distribution_for_jumps():
    m = MarketModel(catalog()["compound_poisson"], r=0.03, lam=0.5, sigma=0.3)
    T = 1.0
    pay = gaussian_payoff(0.05, 0.2)
    rep = replicate_payoff(m, gaussian_transform(0.05, 0.2), T)
    ref = payoff_price_from_distribution(rn_distribution(m, T), pay, m.r, T)
    assert rep.price == pytest.approx(ref, abs=1e-4)


def test_linearity_via_combine():
    m = MarketModel(catalog()["variance_gamma"], r=0.01, lam=0.3, sigma=0.4)
    g1, g2 = gaussian_transform(0.0, 0.5), gaussian_transform(0.3, 1.5)
    combo = g1.combine(g2, 2.0, -0.5)
    assert combo.provenance == "closed_form"
    p = replicate_payoff(m, combo, 1.0).price
    p1, p2 = replicate_payoff(m, g1, 1.0).price, replicate_payoff(m, g2, 1.0).price
    assert p == pytest.approx(2.0 * p1 - 0.5 * p2, abs=1e-10)
    assert g1.combine(transform_from_payoff(gaussian_payoff())).provenance == "quadrature"


def test_indicator_replication_against_distribution():
    m = gbm(0.25)
    pay = smoothed_indicator_payoff(-0.1, 0.2, 0.1)
    rep = replicate_payoff(m, transform_from_payoff(pay), 1.0)
    ref = payoff_price_from_distribution(rn_distribution(m, 1.0), pay, m.r, 1.0)
    assert rep.price == pytest.approx(ref, abs=1e-6)


def test_tabulated_replication_against_distribution():
    m = gbm(0.3)
    x = np.linspace(-0.6, 0.6, 25)
    pay = tabulated_payoff(x, np.maximum(0.0, 0.6 - np.abs(x)))
    rep = replicate_payoff(m, transform_from_payoff(pay), 1.0, q_cap=400.0, tol=1e-6)
    ref = payoff_price_from_distribution(rn_distribution(m, 1.0), pay, m.r, 1.0)
    assert rep.price == pytest.approx(ref, abs=1e-5)


def test_slow_transform_reports_tail():
    # kinked payoff decays like q^-2, so a tight tolerance cannot be met
    pay = tabulated_payoff([-1.0, 0.0, 1.0], [0.0, 1.0, 0.0])
    m = MarketModel(catalog()["poisson"], r=0.0, lam=0.2, sigma=0.3)
    with pytest.raises(NumericalError) as info:
        replicate_payoff(m, transform_from_payoff(pay), 1.0, q_cap=20.0)
    assert info.value.bound > 1e-9
