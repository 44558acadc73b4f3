import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from conftest import catalog
from levylab.errors import ActivityError, DomainError, ParameterError
from levylab.exponents import (DoubleExponential, ExponentDomain, FromTriplet, LevyMeasureSpec, LevyTriplet,
                               NormalJumps, PointMass, check_exp_moment_condition, drift_shift, esscher,
                               eval_exponent, eval_exponent_complex, exponent_from_dict, exponent_from_triplet,
                               exponent_from_triplet_complex, jump_rate, make_catalog_process, rescale)

SQRT2 = math.sqrt(2.0)


def gamma_measure(m=1.0):
    return LevyMeasureSpec(density=lambda x: np.where(x > 0, m * np.exp(-np.abs(x)) / np.abs(x), 0.0),
                           singularity_order=1.0, support=(0.0, math.inf))


# --------------------------------------------------------------------------- #
# Catalog construction and evaluation
# --------------------------------------------------------------------------- #


def test_brownian_closed_form():
    bm = make_catalog_process("brownian")
    assert bm(2.0) == 2.0
    assert bm.domain == ExponentDomain(-math.inf, math.inf)


def test_gamma_at_zero():
    assert make_catalog_process("gamma", m=1)(0.0) == 0.0


def test_variance_gamma_value_and_domain():
    vg = make_catalog_process("variance_gamma", m=1)
    assert vg(1.0) == pytest.approx(math.log(2.0), abs=1e-12)
    assert vg.domain.beta == pytest.approx(-SQRT2) and vg.domain.gamma == pytest.approx(SQRT2)
    vg2 = make_catalog_process("vg", m=2.5)
    assert vg2.domain.gamma == pytest.approx(2.5 * SQRT2)


def test_eval_examples():
    assert eval_exponent(make_catalog_process("poisson", m=2), 1.0) == pytest.approx(2 * (math.e - 1), abs=1e-12)
    assert eval_exponent(make_catalog_process("gamma", m=1), 0.5) == pytest.approx(math.log(2.0), abs=1e-12)


def test_gamma_domain_error_carries_endpoint():
    with pytest.raises(DomainError) as info:
        eval_exponent(make_catalog_process("gamma", m=1), 1.5)
    assert info.value.endpoint == 1.0


@pytest.mark.parametrize("kind", ["poisson", "gamma", "variance_gamma", "compound_poisson"])
@pytest.mark.parametrize("m", [0.0, -1.0])
def test_nonpositive_rate_rejected(kind, m):
    with pytest.raises(ParameterError):
        make_catalog_process(kind, m=m)


def test_unknown_kind_rejected():
    with pytest.raises(ParameterError):
        make_catalog_process("meixner")


def test_compound_poisson_domains():
    assert make_catalog_process("cp", m=1, jumps=NormalJumps(0, 0.25)).domain == ExponentDomain()
    dexp = make_catalog_process("cp", m=1, jumps=DoubleExponential(0.4, 3.0, 5.0))
    assert (dexp.domain.beta, dexp.domain.gamma) == (-5.0, 3.0)
    cp = make_catalog_process("cp", m=1.5, jumps=PointMass(-0.5))
    assert cp(2.0) == pytest.approx(1.5 * (math.exp(-1.0) - 1.0), abs=1e-14)


def test_double_exponential_closed_form():
    law = DoubleExponential(0.3, 4.0, 6.0)
    cp = make_catalog_process("cp", m=2.0, jumps=law)
    a = 1.5
    theta = 0.3 * 4 / (4 - a) + 0.7 * 6 / (6 + a)
    assert cp(a) == pytest.approx(2.0 * (theta - 1.0), rel=1e-13)


def test_zero_is_zero(process):
    assert abs(process(0.0)) <= 1e-14


def test_convexity(process):
    assert process.check_convexity(101, 1e-9)


# --------------------------------------------------------------------------- #
# Complex evaluation
# --------------------------------------------------------------------------- #


def test_complex_examples():
    assert eval_exponent_complex(make_catalog_process("brownian"), 1j) == pytest.approx(-0.5)
    assert eval_exponent_complex(make_catalog_process("poisson", m=1), 1j * math.pi) == pytest.approx(-2.0, abs=1e-14)


def test_complex_zero(process):
    assert eval_exponent_complex(process, 0j) == 0


def test_complex_matches_real_axis(process):
    grid = process.domain.interior_grid(25, cap=3.0, fraction=0.8)
    assert np.max(np.abs(process.evaluate_complex(grid + 0j) - process(grid))) < 1e-12


def test_complex_domain_error():
    with pytest.raises(DomainError):
        make_catalog_process("gamma").evaluate_complex(1.2 + 3j)


def test_complex_hermitian(process):
    z = np.array([0.1 + 0.7j, -0.3 + 2.0j, 0.2 - 1.1j])
    assert np.allclose(process.evaluate_complex(np.conj(z)), np.conj(process.evaluate_complex(z)), atol=1e-14)


def test_complex_triplet_matches_closed_form():
    cp = make_catalog_process("cp", m=1, jumps=NormalJumps(0.1, 0.25))
    for z in (0.5 + 1j, -1.0 + 3j):
        assert exponent_from_triplet_complex(cp.triplet(), z) == pytest.approx(cp.evaluate_complex(z), abs=1e-9)


def test_characteristic_function_is_bounded(process):
    kappa = np.linspace(-20, 20, 81)
    assert np.all(process.evaluate_complex(1j * kappa).real <= 1e-12)


# --------------------------------------------------------------------------- #
# Triplets and measures
# --------------------------------------------------------------------------- #


def test_triplet_brownian():
    assert exponent_from_triplet(LevyTriplet(0.0, 1.0, LevyMeasureSpec()), 3.0) == pytest.approx(4.5)


def test_triplet_poisson_atom():
    # an atom at x = 1 lies outside the truncation region |x| < 1, so no drift correction is needed
    t = LevyTriplet(0.0, 0.0, LevyMeasureSpec(atoms=((1.0, 1.0),)))
    assert exponent_from_triplet(t, 1.0) == pytest.approx(math.e - 1.0, abs=1e-12)
    assert exponent_from_triplet(t, 1.0) == pytest.approx(make_catalog_process("poisson", m=1)(1.0), abs=1e-12)


def test_triplet_gamma():
    t = LevyTriplet(1.0 - math.exp(-1.0), 0.0, gamma_measure())
    assert exponent_from_triplet(t, 0.5) == pytest.approx(math.log(2.0), abs=1e-8)


@pytest.mark.parametrize("name", ["poisson", "compound_poisson", "gamma", "variance_gamma"])
def test_triplet_agrees_with_closed_form(name):
    proc = catalog()[name]
    grid = proc.domain.interior_grid(21, cap=5.0, fraction=0.9)
    trip = proc.triplet()
    assert np.max(np.abs([exponent_from_triplet(trip, a) - proc(a) for a in grid])) < 1e-8


def test_from_triplet_exponent_round_trip():
    proc = catalog()["compound_poisson"]
    ft = FromTriplet(proc.triplet())
    grid = np.linspace(-2, 2, 9)
    assert np.max(np.abs(ft(grid) - proc(grid))) < 1e-8


def test_moment_condition_examples():
    g = gamma_measure()
    assert check_exp_moment_condition(g, 0.5)
    assert not check_exp_moment_condition(g, 1.5)
    atoms = LevyMeasureSpec(atoms=((1.0, 2.0), (-3.0, 0.5)))
    assert all(check_exp_moment_condition(atoms, a) for a in (-50.0, 0.0, 50.0))


def test_measure_validation():
    with pytest.raises(ParameterError):
        LevyMeasureSpec(atoms=((0.0, 1.0),))
    with pytest.raises(ParameterError):
        LevyMeasureSpec(atoms=((1.0, -1.0),))
    with pytest.raises(ParameterError):
        LevyMeasureSpec(density=lambda x: np.where(x != 0, np.abs(x) ** -3.5, 0.0), singularity_order=3.5)


def test_jump_rate_examples():
    assert jump_rate(make_catalog_process("poisson", m=2).measure, (0.5, 1.5)) == pytest.approx(2.0)
    oracle, _ = integrate.quad(lambda z: math.exp(-z) / z, 1.0, math.inf)
    assert oracle == pytest.approx(0.219384, abs=1e-6)
    assert jump_rate(gamma_measure(), (1.0, math.inf)) == pytest.approx(oracle, abs=1e-10)
    assert jump_rate(gamma_measure(), (2.0, 2.0)) == 0.0


def test_jump_rate_activity_error():
    with pytest.raises(ActivityError):
        jump_rate(gamma_measure(), (-1.0, 1.0))
    # finite activity across the origin is fine
    assert jump_rate(catalog()["compound_poisson"].measure, (-math.inf, math.inf)) == pytest.approx(1.0, abs=1e-8)


def test_domain_requires_origin():
    with pytest.raises(ParameterError):
        ExponentDomain(0.0, 1.0)


# --------------------------------------------------------------------------- #
# Transforms
# --------------------------------------------------------------------------- #


def test_esscher_examples():
    bm = make_catalog_process("brownian")
    assert esscher(bm, 1.0)(1.0) == pytest.approx(1.5)
    assert esscher(bm, 0.0) is bm
    g = esscher(make_catalog_process("gamma", m=1), 0.5)
    assert g(0.25) == pytest.approx(math.log(2.0), abs=1e-12)
    assert g.domain.gamma == pytest.approx(0.5)


def test_esscher_outside_domain():
    with pytest.raises(DomainError):
        esscher(make_catalog_process("gamma"), 1.0)


def test_drift_shift_examples():
    bm = make_catalog_process("brownian")
    assert drift_shift(bm, 2.0)(1.0) == pytest.approx(2.5)
    assert drift_shift(bm, 0.0) is bm
    assert drift_shift(make_catalog_process("poisson", m=1), -1.0)(1.0) == pytest.approx(math.e - 2, abs=1e-12)


def test_rescale_examples():
    bm = make_catalog_process("brownian")
    assert rescale(bm, 2.0)(1.0) == pytest.approx(2.0)
    assert rescale(bm, 1.0) is bm
    assert rescale(make_catalog_process("gamma"), 0.5).domain.gamma == pytest.approx(2.0)
    with pytest.raises(ParameterError):
        rescale(bm, 0.0)
    with pytest.raises(ParameterError):
        rescale(bm, -1.0)


def test_transform_measures_are_consistent():
    proc = catalog()["compound_poisson"]
    for spec in (esscher(proc, 0.4), rescale(proc, 0.5), drift_shift(proc, 0.3)):
        grid = np.linspace(-1, 1, 7)
        # psi minus its measure part is affine in alpha, since the law has no Gaussian part
        jumps = np.array([exponent_from_triplet(LevyTriplet(0.0, 0.0, spec.measure), a) for a in grid])
        rest = spec(grid) - jumps
        assert np.max(np.abs(np.diff(rest, 2))) < 1e-8


tilts = st.floats(-0.4, 0.4)


@given(tilts, tilts, st.floats(-2, 2))
def test_esscher_composition(d1, d2, eps):
    for proc in catalog().values():
        a = np.linspace(-0.1, 0.1, 5)
        lhs = esscher(esscher(proc, d1), d2)
        rhs = esscher(proc, d1 + d2)
        assert np.max(np.abs(lhs(a) - rhs(a))) < 1e-12


@given(tilts, st.floats(-2, 2))
def test_esscher_commutes_with_drift(delta, eps):
    for proc in catalog().values():
        a = np.linspace(-0.1, 0.1, 5)
        lhs = esscher(drift_shift(proc, eps), delta)
        rhs = drift_shift(esscher(proc, delta), eps)
        assert np.max(np.abs(lhs(a) - rhs(a))) < 1e-12


@given(st.floats(0.2, 3.0), st.floats(-0.3, 0.3))
def test_rescale_is_scaling(sigma, a):
    for proc in catalog().values():
        if proc.domain.contains(sigma * a) and proc.domain.contains(a):
            assert rescale(proc, sigma)(a) == pytest.approx(proc(sigma * a), abs=1e-14)


@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_midpoint_convexity(a, b):
    for proc in catalog().values():
        lo, hi = proc.domain.window(1.0, 0.9)
        x, y = np.clip([a, b], lo, hi)
        assert proc(0.5 * (x + y)) <= 0.5 * (proc(x) + proc(y)) + 1e-12


# --------------------------------------------------------------------------- #
# Serialization and sampling
# --------------------------------------------------------------------------- #


def test_json_round_trip(process):
    spec = drift_shift(esscher(rescale(process, 0.7), 0.2), -0.1)
    back = exponent_from_dict(spec.to_dict())
    grid = np.linspace(-0.4, 0.4, 9)
    assert np.array_equal(back(grid), spec(grid))


def test_samples_have_right_mean(process, rng):
    # psi'(0) is the mean of xi_1
    x = process.sample(rng, 1.0, 200_000)
    h = 1e-5
    mean = (process(h) - process(-h)) / (2 * h)
    var = (process(h) - 2 * process(0.0) + process(-h)) / h**2
    assert abs(x.mean() - mean) < 4 * math.sqrt(var / x.size)


def test_sample_shapes(process, rng):
    assert process.sample(rng, 0.5, (7, 3)).shape == (7, 3)
