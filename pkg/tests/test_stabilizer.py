import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fuzzystab.algebra import make_poly_trunc_algebra, make_real_algebra
from fuzzystab.control import (
    ALIGNED,
    DERIVATION,
    ApproximateMap,
    constant_control,
    conjugation_map,
    euler_derivation,
    identity_map,
    powersum_control,
)
from fuzzystab.fuzzy_norm import FuzzyNorm, default_grid
from fuzzystab.stabilizer import (
    DYADIC,
    LINEAR,
    SUPERLINEAR,
    RecoveredMap,
    StabilizationOverflow,
    StabilizerConfig,
    bound_thresholds,
    certify_trajectory,
    fuzzy_bound_threshold,
    hyers_bound,
    iterate,
    rassias_bound,
    stabilize,
)


def rassias_map(real, eps=0.1, p=0.5):
    return ApproximateMap(identity_map(real), powersum_control(eps, p), noise_scale=math.inf, profile=ALIGNED)


# -- closed-form oracles ------------------------------------------------------------


def test_noise_free_map_is_a_fixed_point(m2):
    f = ApproximateMap(conjugation_map(m2), powersum_control(0.1, 0.5))
    pts = default_grid(m2).points
    res = stabilize(f, pts)
    assert res.all_converged
    assert np.all(res.iters_used == 1) and np.all(res.residual == 0)
    assert np.allclose(res.values, f.evaluate(pts))


@pytest.mark.parametrize("n", [1, 5, 20, 40])
def test_dyadic_iterate_has_geometric_error(real, n):
    # 2^-n f(2^n x) = x + eps 2^(n(p-1)) |x|^p
    f = rassias_map(real)
    x = 1.0
    got = iterate(f, real.element([x]), n).coeffs[0]
    assert got - x == pytest.approx(0.1 * 2.0 ** (n * (0.5 - 1)), rel=1e-6)


def test_dyadic_iterate_at_64_is_tiny(real):
    f = rassias_map(real)
    assert abs(iterate(f, real.element([1.0]), 64).coeffs[0] - 1.0) < 1e-10


def test_dyadic_stabilization_recovers_identity(real):
    f = rassias_map(real)
    pts = default_grid(real).points
    res = stabilize(f, pts)
    assert res.all_converged
    assert np.max(np.abs(res.values - pts)) < 1e-8
    diffs = np.abs(np.diff(res.trajectory[2][:, 0]))
    ratios = diffs[1:10] / diffs[:9]
    assert np.allclose(ratios, 2 ** -0.5, rtol=1e-6)


def test_superlinear_stabilization_recovers_identity(real):
    f = ApproximateMap(identity_map(real), powersum_control(0.1, 2.0, superlinear=True), noise_scale=math.inf, profile=ALIGNED)
    res = stabilize(f, default_grid(real).points, StabilizerConfig(mode=SUPERLINEAR))
    assert res.all_converged
    assert np.max(np.abs(res.values - default_grid(real).points)) < 1e-9
    assert abs(iterate(f, real.element([1.0]), 64, SUPERLINEAR).coeffs[0] - 1.0) < 1e-10


def test_superlinear_does_not_stop_on_a_plateau(real):
    # With the noise capped at 0.05, 2^2 f(1) and 2^3 f(1/2) both equal 4.2 for a = 4.
    f = ApproximateMap(identity_map(real), powersum_control(0.1, 2.0, superlinear=True), noise_scale=0.05, profile=ALIGNED)
    assert iterate(f, real.element([4.0]), 2, SUPERLINEAR) == iterate(f, real.element([4.0]), 3, SUPERLINEAR)
    res = stabilize(f, np.array([[4.0]]), StabilizerConfig(mode=SUPERLINEAR))
    assert res.values[0, 0] == pytest.approx(4.0, abs=1e-9)


def test_linear_diagnostic_converges_slowly(real):
    f = rassias_map(real)
    res = stabilize(f, np.array([[1.0]]), StabilizerConfig(mode=LINEAR, max_iters=10000, tol=1e-13))
    # f(n)/n - 1 = eps n^(p-1): still 1e-3 away after 1e4 terms.
    assert not res.converged[0]
    assert res.values[0, 0] - 1.0 == pytest.approx(0.1 / math.sqrt(10000), rel=1e-9)
    assert res.iters_used[0] == 9999
    assert res.trajectory_index[0][-1] == 9999 and len(res.trajectory[0]) < 10000


def test_modes_need_matching_controls(real):
    f = rassias_map(real)
    with pytest.raises(ValueError):
        stabilize(f, np.array([[1.0]]), StabilizerConfig(mode=SUPERLINEAR))
    g = ApproximateMap(identity_map(real), powersum_control(0.1, 2.0, superlinear=True))
    with pytest.raises(ValueError, match="0<alpha<2"):
        stabilize(g, np.array([[1.0]]))


def test_overflow_is_reported(real):
    f = ApproximateMap(identity_map(real), constant_control(0.1))
    with pytest.raises(StabilizationOverflow):
        stabilize(f, np.array([[1e10]]), StabilizerConfig(mode=LINEAR, max_iters=10, overflow_cap=1e5))


def test_config_validation():
    for bad in ({"mode": "cubic"}, {"max_iters": 0}, {"tol": 0.0}, {"fuzzy_delta": 1.0}, {"overflow_cap": -1.0}):
        with pytest.raises(ValueError):
            StabilizerConfig(**bad)


def test_unconverged_probes_are_flagged(real):
    res = stabilize(rassias_map(real), np.array([[1.0]]), StabilizerConfig(max_iters=3))
    assert not res.converged[0] and res.iters_used[0] == 3


def test_recovered_map_caches_rows(poly2):
    f = ApproximateMap(euler_derivation(poly2), constant_control(0.1), noise_seed=1, noise_scale=0.01, mode=DERIVATION)
    h = RecoveredMap(f)
    pts = default_grid(poly2).points
    first = h.evaluate(pts[:, None, :] + pts[None, :3, :])
    again = h.evaluate(pts[:, None, :] + pts[None, :3, :])
    assert np.array_equal(first, again)
    assert np.allclose(first, euler_derivation(poly2).evaluate(pts[:, None, :] + pts[None, :3, :]), atol=1e-8)


@given(st.floats(-1e3, 1e3, allow_nan=False), st.integers(0, 2**32))
def test_recovered_value_is_additive_and_close_to_f(x, seed):
    dual = make_poly_trunc_algebra(1)  # R[t]/(t^2)
    f = ApproximateMap(identity_map(dual), constant_control(0.1), noise_seed=seed, noise_scale=0.05)
    a = np.array([x, -x / 3])
    res = stabilize(f, np.stack([a, 2 * a, 3 * a]))
    assert np.allclose(res.values[0] + res.values[1], res.values[2], atol=1e-7 * (1 + abs(x)))
    assert np.max(np.abs(res.values[0] - f.evaluate(a))) <= 0.05 + 1e-9


# -- bounds --------------------------------------------------------------------------


def test_hyers_bound():
    assert hyers_bound(0.1) == 0.1 and hyers_bound(0.0) == 0.0 and hyers_bound(2.5) == 2.5
    with pytest.raises(ValueError):
        hyers_bound(-1.0)


def test_rassias_bound_values():
    assert rassias_bound(0.1, 0.5, 1.0) == pytest.approx(0.2 / (2 - math.sqrt(2)))
    assert rassias_bound(0.1, 0.5, 1.0) == pytest.approx(0.341421356, rel=1e-8)
    assert rassias_bound(0.1, 0.0, 3.0) == pytest.approx(0.2)
    assert rassias_bound(0.1, 0.5, 4.0) == pytest.approx(0.682842712, rel=1e-8)
    with pytest.raises(ValueError):
        rassias_bound(0.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        rassias_bound(0.1, -1.0, 0.0)


def test_fuzzy_bound_thresholds(real):
    assert fuzzy_bound_threshold(constant_control(0.1), real.element([5.0])) == pytest.approx(0.2)
    ps = powersum_control(0.1, 0.5)
    assert fuzzy_bound_threshold(ps, real.element([1.0])) == pytest.approx(0.682842712, rel=1e-8)
    assert fuzzy_bound_threshold(ps, real.element([0.0])) == 0.0
    # Twice the classical bound because phi(a, a) = 2 eps |a|^p.
    assert fuzzy_bound_threshold(ps, real.element([1.0])) == pytest.approx(2 * rassias_bound(0.1, 0.5, 1.0))


@given(st.floats(1e-3, 1e3), st.floats(-0.9, 0.9))
def test_recovered_identity_respects_the_classical_bound(x, p):
    real = make_real_algebra()
    f = rassias_map(real, 0.1, p)
    res = stabilize(f, np.array([[x]]), StabilizerConfig(max_iters=200, tol=1e-12))
    dist = abs(f.evaluate(np.array([x]))[0] - res.values[0, 0])
    assert dist <= rassias_bound(0.1, p, x) * (1 + 1e-6)
    assert dist <= bound_thresholds(powersum_control(0.1, p), np.array([x]))[0]


# -- trajectory certificate -------------------------------------------------------------


def test_trajectory_certificate_with_indicator_norm(real):
    res = stabilize(rassias_map(real), default_grid(real).points)
    cert = certify_trajectory(res, FuzzyNorm.indicator(), default_grid(real).thresholds, 1e-6)
    assert cert.passed


def test_ratio_norm_certificate_depends_on_delta(real):
    # Early tail iterates are ~1e-8 from the limit: a/(a + 1e-8) misses 1 - 1e-6 at a = 1e-3.
    res = stabilize(rassias_map(real), default_grid(real).points)
    t = default_grid(real).thresholds
    assert not certify_trajectory(res, FuzzyNorm.ratio(), t, 1e-6).passed
    assert certify_trajectory(res, FuzzyNorm.ratio(), t, 1e-4).passed
