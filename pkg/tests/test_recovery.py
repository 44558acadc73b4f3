import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import catalog
from levylab.errors import DataError, DomainError, InsufficientDataError, NumericalError, ParameterError
from levylab.exponents import drift_shift, esscher, exponent_from_dict, make_catalog_process, rescale
from levylab.market import (MarketModel, PriceCurve, default_q_grid, power_price, sample_imaginary_curve,
                            sample_power_curve)
from levylab.options import rn_exponent
from levylab.recovery import (DataFunction, compute_D0, compute_D0_imaginary, fit_gauge, gauge_transform,
                              infer_rate_and_spot, node_aligned_grid, recover_exponent, recover_imaginary,
                              recover_numeraire, unit_volatility_exponent, verify_recovery)

BM = make_catalog_process("brownian")


def curve_for(model, n=201, T=1.0):
    return sample_power_curve(model, default_q_grid(model, n), T)


# --------------------------------------------------------------------------- #
# Data function
# --------------------------------------------------------------------------- #


def test_brownian_d0_closed_form():
    m = MarketModel(BM, r=0.04, lam=0.5, sigma=1.0, s0=1.7)
    d0 = compute_D0(curve_for(m, T=2.0))
    q = d0.q
    assert np.max(np.abs(d0.values - q * (q - 1) / 2)) < 1e-10
    assert d0.value_at_node(0.0) == pytest.approx(0.0, abs=1e-12)
    assert d0.value_at_node(1.0) == pytest.approx(0.0, abs=1e-12)


def test_numeraire_curve_has_zero_at_one(process):
    m = MarketModel(process, r=0.02, lam=0.5, sigma=0.5)
    assert abs(compute_D0(curve_for(m)).value_at_node(1.0)) < 1e-12


def test_rate_and_spot_inferred():
    m = MarketModel(catalog()["gamma"], r=0.07, lam=0.3, sigma=0.5, s0=3.0)
    r, s0 = infer_rate_and_spot(curve_for(m, T=0.5))
    assert r == pytest.approx(0.07, abs=1e-13) and s0 == pytest.approx(3.0, rel=1e-13)


def test_d0_convex(process):
    m = MarketModel(process, r=0.01, lam=0.4, sigma=0.6)
    assert compute_D0(curve_for(m)).is_convex(1e-9)


def test_d0_missing_anchor():
    m = MarketModel(BM)
    with pytest.raises(InsufficientDataError):
        compute_D0(sample_power_curve(m, np.linspace(-1, 0.9, 20), 1.0))
    with pytest.raises(InsufficientDataError):
        compute_D0(sample_power_curve(m, np.linspace(0.1, 2, 20), 1.0))


def test_d0_nonpositive_price():
    q = np.linspace(-1, 2, 13)
    prices = power_price(MarketModel(BM), q, 1.0)
    prices[2] = -1.0
    with pytest.raises(DataError):
        compute_D0(PriceCurve.from_prices(1.0, q, prices))


def test_data_function_validation():
    with pytest.raises(DataError):
        DataFunction(np.array([0.0, 0.1, 0.3, 0.4, 0.5]), np.zeros(5))
    with pytest.raises(DataError):
        DataFunction(np.array([0.0, 1.0, 2.0]), np.zeros(3))


def test_data_function_no_extrapolation():
    d0 = compute_D0(curve_for(MarketModel(BM)))
    lo, hi = d0.domain
    with pytest.raises(DomainError):
        d0(hi + 0.01)
    with pytest.raises(DomainError):
        d0(lo - 0.01)


def test_interpolant_is_c2():
    d0 = compute_D0(curve_for(MarketModel(catalog()["variance_gamma"], lam=0.3, sigma=0.8)))
    spline = d0._spline
    knots = d0.q[5:-5:7]
    for order in (0, 1, 2):
        left, right = spline(knots - 1e-9, order), spline(knots + 1e-9, order)
        assert np.max(np.abs(left - right)) < 1e-5


# --------------------------------------------------------------------------- #
# Recovery and verification
# --------------------------------------------------------------------------- #


def test_brownian_recovery_lambda_zero():
    d0 = compute_D0(curve_for(MarketModel(BM, lam=0.5, sigma=1.0)))
    rec = recover_exponent(d0, 0.0, 0.0)
    a = node_aligned_grid(d0, 0.0, 1)
    assert np.max(np.abs(rec(a) - a * (a - 1) / 2)) < 1e-12
    pair = fit_gauge(BM, rec, a)
    assert (pair.c, pair.mu) == pytest.approx((-0.5, 0.0), abs=1e-9)
    assert pair.residual < 1e-10


def test_recovery_with_true_gauge_is_exact(process):
    m = MarketModel(process, r=0.02, lam=0.4, sigma=0.5)
    q = np.linspace(-0.5, 1.5, 81)  # step 1/40, so lambda/sigma = 0.8 is a node
    d0 = compute_D0(sample_power_curve(m, q, 1.0))
    truth = unit_volatility_exponent(m)
    lam = m.lam / m.sigma
    rec = recover_exponent(d0, lam, truth(1 - lam) - truth(-lam))
    a = node_aligned_grid(d0, lam, 1)
    assert np.max(np.abs(rec(a) - truth(a))) < 1e-12


def test_recovered_zero(process):
    m = MarketModel(process, lam=0.3, sigma=0.5)
    rec = recover_exponent(compute_D0(curve_for(m)), 0.7, 0.25)
    assert abs(rec(0.0)) < 1e-12


def test_recover_lambda_hat_out_of_range():
    d0 = compute_D0(curve_for(MarketModel(BM)))
    with pytest.raises(DomainError):
        recover_exponent(d0, d0.domain[1] + 1.0)
    rec = recover_exponent(d0, 0.5)
    with pytest.raises(DomainError):
        rec(d0.domain[1])


def test_numeraire_brownian_exact():
    m = MarketModel(BM, r=0.03, lam=1.0, sigma=1.0)
    d0 = compute_D0(curve_for(m))
    # D0(q) = psi(q - 1) + (q - 1) psi(-1), so the recovered exponent is a^2/2 + a/2 + b a
    rec = recover_numeraire(d0, -0.5)
    a = node_aligned_grid(d0, 1.0, 1)
    assert np.max(np.abs(rec(a) - 0.5 * a * a)) < 1e-12
    assert abs(rec(0.0)) < 1e-15


def test_numeraire_drift_only(process):
    m = MarketModel(process, r=0.0, lam=0.5, sigma=0.5)
    d0 = compute_D0(curve_for(m))
    rec = recover_numeraire(d0, 0.0)
    grid = node_aligned_grid(d0, 1.0, 2)
    pair = fit_gauge(unit_volatility_exponent(m), rec, grid)
    assert pair.residual < 1e-8
    assert abs(pair.mu) < 1e-6


def test_generic_curves_need_both_parameters():
    for name in ("poisson", "gamma", "variance_gamma", "compound_poisson"):
        m = MarketModel(catalog()[name], lam=0.6, sigma=0.3)
        d0 = compute_D0(curve_for(m))
        rec = recover_exponent(d0, 1.0, 0.0)
        grid = node_aligned_grid(d0, 1.0, 2)
        truth = unit_volatility_exponent(m)
        assert fit_gauge(truth, rec, grid).residual < 1e-8
        assert fit_gauge(truth, rec, grid, fix_mu=0.0).residual > 1e-5


def test_verify_recovery_examples(process):
    m = MarketModel(process, r=0.02, lam=0.3, sigma=0.6)
    d0 = compute_D0(curve_for(m))
    rec = recover_exponent(d0, 0.5, 0.1)
    assert verify_recovery(d0, rec) < 1e-8
    bumped_vals = d0.values.copy()
    bumped_vals[d0.q.size // 3] += 1e-3
    bumped = DataFunction(d0.q, bumped_vals, d0.maturity, d0.r, d0.s0)
    assert verify_recovery(bumped, rec) >= 1e-4


def test_verify_recovery_degenerate():
    q = np.linspace(-1, 2, 31)
    d0 = DataFunction(q, np.zeros_like(q))
    rec = recover_exponent(d0, 0.4, 0.3)
    assert rec(0.5) == pytest.approx(0.15)
    assert verify_recovery(d0, rec) < 1e-15  # the linear terms cancel exactly up to rounding


def test_recovered_json_round_trip():
    d0 = compute_D0(curve_for(MarketModel(catalog()["gamma"], lam=0.3, sigma=0.5)))
    rec = recover_exponent(d0, 0.4, -0.2)
    back = exponent_from_dict(rec.to_dict())
    a = node_aligned_grid(d0, 0.4, 3)
    assert np.array_equal(back(a), rec(a))


# --------------------------------------------------------------------------- #
# Gauge fitting
# --------------------------------------------------------------------------- #


GRID = np.linspace(-0.5, 0.5, 21)


def test_gauge_identity(process):
    pair = fit_gauge(process, process, GRID)
    assert (pair.c, pair.mu) == pytest.approx((0.0, 0.0), abs=1e-7)
    assert pair.residual < 1e-12


def test_gauge_pure_drift(process):
    pair = fit_gauge(process, drift_shift(process, 3.0), GRID)
    assert (pair.c, pair.mu) == pytest.approx((3.0, 0.0), abs=1e-6)
    assert pair.residual < 1e-10


def test_gauge_brownian_family():
    pair = fit_gauge(BM, lambda a: 0.5 * np.asarray(a) ** 2 + np.asarray(a), GRID)
    assert pair.c + pair.mu == pytest.approx(1.0, abs=1e-10)
    assert pair.mu == 0.0  # minimal-|mu| member of the family
    assert pair.residual < 1e-10


@pytest.mark.parametrize("name", ["poisson", "compound_poisson", "gamma", "variance_gamma"])
def test_gauge_recovers_tilt(name):
    proc = catalog()[name]
    target = gauge_transform(proc, 0.3, -0.7)
    pair = fit_gauge(proc, target, GRID)
    assert (pair.c, pair.mu) == pytest.approx((-0.7, 0.3), abs=1e-6)
    assert pair.residual < 1e-10


def test_gauge_grid_too_small():
    with pytest.raises(ParameterError):
        fit_gauge(BM, BM, [0.0, 0.1, 0.2, 0.3])


def test_gauge_tolerance_returns_none():
    vg, gamma = catalog()["variance_gamma"], catalog()["gamma"]
    assert fit_gauge(vg, gamma, GRID, tol=1e-12) is None
    assert fit_gauge(vg, vg, GRID, tol=1e-12) is not None


def test_gauge_action_on_recovery(process):
    m = MarketModel(process, r=0.01, lam=0.4, sigma=0.6)
    d0 = compute_D0(curve_for(m))
    mu = 10 * d0.step
    base = recover_exponent(d0, 0.5, 0.0)
    moved = recover_exponent(d0, 0.5 + mu, 0.0)
    grid = node_aligned_grid(d0, 0.5 + mu, 15)
    pair = fit_gauge(base, moved, grid)
    assert pair.mu == pytest.approx(mu, abs=1e-6) or process.kind == "brownian"
    assert pair.residual < 1e-10


def test_esscher_form_of_recovery(process):
    # recovered minus its linear term is an Esscher tilt of the truth
    m = MarketModel(process, r=0.01, lam=0.5, sigma=0.5)
    d0 = compute_D0(curve_for(m))
    rec = recover_exponent(d0, 0.2, 0.0)
    truth = unit_volatility_exponent(m)
    grid = node_aligned_grid(d0, 0.2, 2)
    pair = fit_gauge(truth, rec, grid)
    tilted = esscher(truth, pair.mu)
    assert np.max(np.abs(rec(grid) - pair.c * grid - tilted(grid))) < 1e-8


@given(st.integers(5, 195), st.floats(-1.0, 1.0))
def test_round_trip_any_node(k, b):
    proc = catalog()["variance_gamma"]
    m = MarketModel(proc, r=0.02, lam=0.5, sigma=0.7)
    d0 = compute_D0(curve_for(m))
    lam_hat = float(d0.q[k])
    rec = recover_exponent(d0, lam_hat, b)
    lo, hi = rec.domain.beta, rec.domain.gamma
    grid = node_aligned_grid(d0, lam_hat, 2)
    grid = grid[(grid > max(lo, -2)) & (grid < min(hi, 2))]
    if grid.size < 9:
        return
    pair = fit_gauge(unit_volatility_exponent(m), rec, grid)
    assert pair.residual < 1e-8
    assert verify_recovery(d0, rec) < 1e-8


# --------------------------------------------------------------------------- #
# Imaginary power data
# --------------------------------------------------------------------------- #


QI = np.linspace(-2, 2, 81)


def imaginary_d0(model, T=1.0):
    return compute_D0_imaginary(sample_imaginary_curve(model, QI, T), None, model.s0)


def test_imaginary_d0_at_zero(process):
    m = MarketModel(process, r=0.03, lam=0.4, sigma=0.5, s0=1.3)
    d0 = imaginary_d0(m)
    assert abs(d0.value_at_node(0.0)) < 1e-14
    assert d0.r == pytest.approx(0.03, abs=1e-14)


def test_imaginary_d0_matches_closed_form(process):
    m = MarketModel(process, r=0.03, lam=0.4, sigma=0.5, s0=1.3)
    d0 = imaginary_d0(m)
    tilde = rescale(rn_exponent(m), m.sigma)
    expected = tilde.evaluate_complex(1j * QI) - 1j * QI * tilde(1.0)
    assert np.max(np.abs(d0.values - expected)) < 1e-12


def test_imaginary_recovery_brownian():
    m = MarketModel(BM, r=0.02, lam=0.0, sigma=1.0, s0=1.2)
    rec = recover_imaginary(imaginary_d0(m), 0.0, 0.0)
    got = rec(QI)
    # psi(iq) = -q^2/2 up to the linear gauge iq psi~(1), here psi(1) = 1/2
    assert np.max(np.abs(got - (-0.5 * QI**2 - 0.5j * QI))) < 1e-10
    pair = np.polyfit(QI, (got - (-0.5 * QI**2)).imag, 1)
    assert pair[0] == pytest.approx(-0.5, abs=1e-10)


def test_imaginary_recovery_hermitian(process):
    m = MarketModel(process, r=0.02, lam=0.3, sigma=0.5, s0=1.1)
    rec = recover_imaginary(imaginary_d0(m), 0.2, 0.1)
    assert np.max(np.abs(rec(-QI) - np.conj(rec(QI)))) < 1e-10
    assert abs(rec(0.0)) < 1e-14


def test_imaginary_recovery_compound_poisson():
    m = MarketModel(catalog()["compound_poisson"], r=0.02, lam=0.5, sigma=1.0, s0=1.2)
    rec = recover_imaginary(imaginary_d0(m), 0.0, 0.0)
    tilde = rn_exponent(m)
    truth = tilde.evaluate_complex(1j * QI) - 1j * QI * tilde(1.0)
    assert np.max(np.abs(rec(QI) - truth)) < 1e-6


def test_imaginary_recovery_ill_conditioned():
    m = MarketModel(BM, r=0.02, lam=0.0, sigma=1.0)
    d0 = compute_D0_imaginary(sample_imaginary_curve(m, np.linspace(-1, 1, 41), 1.0), None, 1.0)
    with pytest.raises(NumericalError) as info:
        recover_imaginary(d0, 100.0, 0.0)
    assert info.value.bound > 1e12


def test_imaginary_needs_zero_sample():
    m = MarketModel(BM)
    with pytest.raises(InsufficientDataError):
        compute_D0_imaginary(sample_imaginary_curve(m, np.linspace(0.1, 1, 10), 1.0), None, 1.0)
