import math

import numpy as np
import pytest

from app.engine.holder import (
    bound_exponent_pair,
    default_grid,
    geometric_grid,
    holder_fit,
    increments_from_run,
    rotation_bound,
    rotation_bound_report,
)
from app.engine.moments import MomentFunction, solve_nu, solve_rho_k
from app.engine.pruefer import RotationRun
from app.errors import DomainError, UnderResolvedError
from app.models.pruefer import max_epsilon


@pytest.fixture(scope="module")
def uniform_moments(uniform_model):
    return MomentFunction.from_model(uniform_model)


def test_quadratic_increment_has_slope_two():
    eps = geometric_grid(0.1, 5)
    fit = holder_fit(eps, 3.0 * eps**2, np.zeros(5))
    assert fit.exponent == pytest.approx(2.0, abs=1e-10)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-10)
    assert fit.resolved == 5

    weighted = holder_fit(-eps, -3.0 * eps**2, 0.01 * 3.0 * eps**2)
    assert weighted.exponent == pytest.approx(2.0, abs=1e-10)
    assert weighted.epsilons == pytest.approx(list(eps))
    np.testing.assert_allclose(weighted.residuals, 0.0, atol=1e-10)


def test_noisy_increments_are_under_resolved():
    eps = geometric_grid(0.1, 6)
    deltas = np.array([1e-6, 2e-6, 0.01, 0.02, 0.03, 0.05])
    stderrs = np.full(6, 1e-5)
    with pytest.raises(UnderResolvedError) as info:
        holder_fit(eps, deltas, stderrs, floor=0.015)
    assert info.value.details["resolved"] == 3
    assert info.value.details["smallest_usable_epsilon"] == pytest.approx(eps[3])
    with pytest.raises(UnderResolvedError) as info:
        holder_fit(eps, np.zeros(6), stderrs)
    assert info.value.details["smallest_usable_epsilon"] is None


def test_geometric_grid():
    np.testing.assert_allclose(geometric_grid(1.0, 3), [0.25, 0.5, 1.0])
    np.testing.assert_allclose(geometric_grid(0.9, 2, ratio=3.0), [0.3, 0.9])
    with pytest.raises(DomainError):
        geometric_grid(1.0, 0)
    with pytest.raises(DomainError):
        geometric_grid(-1.0, 3)


def test_default_grid_respects_region_ordering(uniform_critical):
    grid = default_grid(uniform_critical, 2.0)
    assert grid.size == 4
    assert grid[-1] < max_epsilon(2.0, uniform_critical.C2, uniform_critical.C4)
    assert np.all(np.diff(grid) > 0)


def test_increments_subtract_boundary_column():
    run = RotationRun(
        ids=np.array([[0.60, 0.52, 0.501], [0.62, 0.54, 0.503]]),
        polymer_rates=np.zeros((2, 3)),
        loops=[[], []],
        steps=[100, 100],
        directions=np.ones((2, 3), dtype=np.int64),
    )
    deltas, stderrs, floor = increments_from_run(run, 0.5, 2.0)
    np.testing.assert_allclose(deltas, [0.108, 0.028])
    np.testing.assert_allclose(stderrs, [0.009, 0.009])
    assert floor == pytest.approx(1.0 / 400.0)


def test_bound_exponent_pair(uniform_moments):
    nu = solve_nu(uniform_moments).nu
    k, xi = bound_exponent_pair(uniform_moments, 1.0, nu)
    assert xi == pytest.approx(0.25)
    assert 2.0 * (solve_rho_k(uniform_moments, k, nu) - xi) == pytest.approx(nu - 1.0, abs=1e-8)
    with pytest.raises(DomainError):
        bound_exponent_pair(uniform_moments, nu + 1.0, nu)


def test_rotation_bound_grows_with_epsilon(uniform_critical, uniform_moments):
    rho = solve_rho_k(uniform_moments, 1.2)
    bounds = [rotation_bound(uniform_moments, uniform_critical, 1.2, rho / 2.0, eps, rho) for eps in (1e-4, 1e-3, 1e-2)]
    assert all(b > 0 for b in bounds)
    assert bounds[0] < bounds[1] < bounds[2]
    with pytest.raises(DomainError):
        rotation_bound(uniform_moments, uniform_critical, 1.2, rho, 1e-3, rho)


def test_rotation_bound_report_per_site(uniform_critical, uniform_moments):
    rho = solve_rho_k(uniform_moments, 1.2)
    report = rotation_bound_report(uniform_moments, uniform_critical, 1.2, rho / 2.0, 1e-3, -1e-9, rho)
    assert report.bound_per_site == pytest.approx(report.bound_per_polymer / 2.0)
    assert report.measured == pytest.approx(1e-9)
    assert report.passed
