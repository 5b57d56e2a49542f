import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import ndtri

from mcqr.core_math import RngStream
from mcqr.errors import DimensionError, DomainError, InvalidConfig
from mcqr.theory_checks import (RateSweep, check_cqr_wip_identity, cqr_grid_loss,
                                cqr_wip_population, estimate_rate_slope,
                                superadditivity_sampled_trial, lower_bound_curve, population_gap,
                                verify_population_lower_bound)

from conftest import random_spd

# int_0^1 Phi^{-1}(t) t dt by adaptive quadrature, frozen before the closed form was used
GAUSSIAN_WIP_QUAD = 0.28209479177387814


def test_gaussian_quadrature_oracle():
    val, _ = quad(lambda t: ndtri(t) * t, 0, 1, limit=200)
    assert val == pytest.approx(GAUSSIAN_WIP_QUAD, abs=1e-9)
    assert cqr_wip_population("gaussian") == pytest.approx(GAUSSIAN_WIP_QUAD, abs=1e-12)
    assert cqr_wip_population("uniform") == pytest.approx(1 / 3)


def test_uniform_residuals_near_one_third():
    lhs, rhs = check_cqr_wip_identity(10_000, 2.0, RngStream(1), "uniform")
    assert abs(lhs - 1 / 3) <= 0.02 and abs(rhs - 1 / 3) <= 0.02


def test_gaussian_residuals_near_quadrature():
    lhs, rhs = check_cqr_wip_identity(10_000, -1.0, RngStream(2), "gaussian")
    assert abs(lhs - GAUSSIAN_WIP_QUAD) <= 0.03 and abs(rhs - GAUSSIAN_WIP_QUAD) <= 0.03


def test_constant_residual_closed_form():
    # point mass at c: check loss vanishes at q = c and mean(Y) = c for centered X;
    # any coupling with a point mass gives c * mean(U)
    c, n = 3.0, 500
    rng = RngStream(3)
    lhs, rhs = check_cqr_wip_identity(n, 2.0, rng, "constant", c=c)
    g = RngStream(3)
    g.standard_normal(n)
    U = g.random(n)
    assert lhs == pytest.approx(c / 2, abs=1e-12)
    assert rhs == pytest.approx(c * U.mean(), abs=1e-12)


def test_grid_loss_uniform_trapezoid():
    # on an exact uniform grid the composite loss equals 1/12 up to O(1/n)
    r = (np.arange(200_000) + 0.5) / 200_000
    assert cqr_grid_loss(r) == pytest.approx(1 / 12, abs=1e-5)


def test_lower_bound_curve():
    assert lower_bound_curve(0.0, 3.0) == pytest.approx(3.0)
    assert lower_bound_curve(2.0, 0.0) == 0.0
    assert lower_bound_curve(1.0, 1.0) == pytest.approx(np.sqrt(2) - 1)
    with pytest.raises(DomainError):
        lower_bound_curve(-1.0, 1.0)
    with pytest.raises(DomainError):
        lower_bound_curve(1.0, -1.0)


def test_population_bound_zero_delta():
    gap, bound = population_gap(np.eye(3), np.zeros((2, 3)), np.eye(2))
    assert gap == pytest.approx(0.0, abs=1e-12) and bound == 0.0


def test_population_bound_isotropic_closed_form():
    # noise I_d and Delta Sigma Delta^T = s^2 I_d: gap = d (sqrt(1 + s^2) - 1),
    # bound = sqrt(d^2 + d s^2) - d
    d, s = 2, 1.5
    Sigma = np.eye(2)
    D = s * np.eye(2)
    gap, bound = population_gap(Sigma, D, np.eye(d))
    assert gap == pytest.approx(d * (np.sqrt(1 + s * s) - 1), rel=1e-12)
    assert bound == pytest.approx(np.sqrt(d * d + d * s * s) - d, rel=1e-12)
    assert gap >= bound


def test_population_bound_dimension_error():
    with pytest.raises(DimensionError):
        population_gap(np.eye(3), np.zeros((2, 2)), np.eye(2))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2 ** 32 - 1))
def test_population_bound_random(d, p, seed):
    g = np.random.default_rng(seed)
    assert verify_population_lower_bound(random_spd(g, p), g.normal(0, 2, (d, p)),
                                         random_spd(g, d))


def test_rate_slope_exact_power():
    n = np.array([100, 200, 400, 800])
    sweep = RateSweep(n, np.repeat((3 * n ** -0.5)[:, None], 20, axis=1))
    slope, r2 = estimate_rate_slope(sweep)
    assert slope == pytest.approx(-0.5, abs=1e-12) and r2 == pytest.approx(1.0)


def test_rate_slope_noisy_quarter():
    g = np.random.default_rng(4)
    n = np.array([100, 200, 400, 800, 1600])
    errs = (2 * n ** -0.25)[:, None] * (1 + 0.01 * g.standard_normal((5, 20)))
    slope, _ = estimate_rate_slope(RateSweep(n, errs))
    assert abs(slope + 0.25) <= 0.03


def test_rate_slope_constant():
    slope, _ = estimate_rate_slope(RateSweep([10, 20, 30, 40], np.ones((4, 20))))
    assert slope == pytest.approx(0.0, abs=1e-12)


def test_rate_slope_needs_grid_and_reps():
    with pytest.raises(InvalidConfig):
        estimate_rate_slope(RateSweep([10, 20, 30], np.ones((3, 20))))
    with pytest.raises(InvalidConfig):
        estimate_rate_slope(RateSweep([10, 20, 30, 40], np.ones((4, 5))))
    with pytest.raises(InvalidConfig):
        RateSweep([10, 10, 30, 40], np.ones((4, 20)))


def test_superadditivity_sampled_small():
    g = np.random.default_rng(5)
    hits = 0
    for k in range(40):
        S, G = random_spd(g, 2), random_spd(g, 2)
        excess, se = superadditivity_sampled_trial(S, G, 800, RngStream(k))
        hits += excess >= -3 * se
    assert hits >= 38


def test_superadditivity_sampled_one_dimension_full_size():
    hits = 0
    for k in range(40):
        S, G = np.array([[1.0 + k % 3]]), np.array([[0.5 + k % 2]])
        excess, se = superadditivity_sampled_trial(S, G, 5000, RngStream(100 + k))
        hits += excess >= -3 * se
    assert hits >= 38
