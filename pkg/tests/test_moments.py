import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from app.engine.moments import (
    MomentFunction,
    gamma0,
    hypothesis_report,
    log_ld_moment,
    log_uniform_power_mean,
    moment,
    rho_k_window,
    solve_nu,
    solve_rho_k,
)
from app.errors import DomainError, NoRootError, UnsupportedCaseError
from app.models.analytics import MomentKind


@pytest.fixture(scope="module")
def uniform_moments(uniform_model):
    return MomentFunction.from_model(uniform_model)


@pytest.fixture(scope="module")
def bernoulli_moments(bernoulli_critical):
    return MomentFunction.from_critical(bernoulli_critical)


def test_uniform_nu(uniform_moments):
    solution = solve_nu(uniform_moments)
    assert solution.nu == pytest.approx(9.71, abs=0.01)
    assert not solution.orientation_swapped
    assert solution.kind == MomentKind.CLOSED_FORM_UNIFORM
    assert solution.residual < 1e-10
    assert solution.bracket[0] < solution.nu < solution.bracket[1]


def test_bernoulli_nu_is_swapped(bernoulli_model, bernoulli_moments):
    natural = solve_nu(MomentFunction.from_model(bernoulli_model))
    assert natural.orientation_swapped
    assert natural.nu == pytest.approx(0.090, abs=0.005)
    exact = solve_nu(bernoulli_moments)
    assert exact.nu == pytest.approx(natural.nu, rel=1e-9)
    assert exact.kind == MomentKind.DISCRETE_EXACT


def test_moment_at_zero_is_one(uniform_moments, bernoulli_moments):
    assert moment(uniform_moments, 0.0) == pytest.approx(1.0, abs=1e-14)
    assert moment(bernoulli_moments, 0.0) == pytest.approx(1.0, abs=1e-14)


def test_closed_form_matches_monte_carlo(uniform_moments, rng):
    kappas = 1.0 / rng.uniform(0.8, 1.6, size=200_000)
    sampled = MomentFunction.monte_carlo(kappas)
    for xi in (-3.0, 2.0, 9.0):
        assert abs(sampled(xi) - uniform_moments(xi)) < 4.0 * sampled.standard_error(xi)
    assert uniform_moments.standard_error(2.0) == 0.0


def test_inverse_power_mean_is_log_ratio():
    assert math.exp(log_uniform_power_mean(1.2, 0.4, -1.0)) == pytest.approx(math.log(2.0) / 0.8, rel=1e-13)


def test_gamma0_matches_quadrature(uniform_model):
    mean_log, _ = quad(math.log, 0.8, 1.6)
    assert gamma0(uniform_model) == pytest.approx(-mean_log / 0.8, abs=1e-12)
    assert gamma0(uniform_model) == pytest.approx(-0.16315, abs=1e-4)


def test_no_root_cases():
    with pytest.raises(NoRootError):
        solve_nu(MomentFunction.from_kappas([0.5], [1.0]))
    with pytest.raises(NoRootError):
        solve_nu(MomentFunction.from_kappas([0.5, 0.8], [0.5, 0.5]))
    with pytest.raises(UnsupportedCaseError):
        solve_nu(MomentFunction.from_kappas([2.0, 0.5], [0.5, 0.5]))


def test_rho_k_tends_to_half_nu(uniform_moments):
    nu = solve_nu(uniform_moments).nu
    assert solve_rho_k(uniform_moments, 1.0 + 1e-6, nu) == pytest.approx(nu / 2.0, rel=1e-3)


def test_rho_k_matches_direct_root(bernoulli_moments):
    def h(rho):
        return rho * math.log(1.1) + math.log((2.0 / 3.0) * 2.7 ** (2 * rho) + (1.0 / 3.0) * 0.1 ** (2 * rho))

    expected = brentq(h, 1e-9, 0.045)
    assert solve_rho_k(bernoulli_moments, 1.1) == pytest.approx(expected, rel=1e-9)


def test_rho_k_decreases_with_k(uniform_moments):
    assert solve_rho_k(uniform_moments, 1.1) > solve_rho_k(uniform_moments, 1.3)


def test_rho_k_window(uniform_moments, bernoulli_moments):
    _, k_max = rho_k_window(uniform_moments)
    assert k_max == pytest.approx(math.exp(0.3263), rel=1e-3)
    _, k_max = rho_k_window(bernoulli_moments)
    assert k_max == pytest.approx(1.2347, abs=1e-3)
    with pytest.raises(DomainError):
        solve_rho_k(bernoulli_moments, 1.0)
    with pytest.raises(DomainError):
        solve_rho_k(bernoulli_moments, k_max + 0.01)


def test_log_moment_is_convex(uniform_moments, bernoulli_moments):
    xi = np.linspace(-5.0, 12.0, 171)
    for mf in (uniform_moments, bernoulli_moments):
        values = np.array([mf.log_moment(x) for x in xi])
        assert np.all(np.diff(values, 2) >= -1e-10)


def test_hypothesis_report(uniform_moments):
    report = hypothesis_report(uniform_moments)
    assert report.kappa_nontrivial
    assert report.two_sided_support
    assert report.nonzero_root
    assert report.support == pytest.approx((0.625, 1.25))
    deterministic = hypothesis_report(MomentFunction.from_kappas([1.0], [1.0]))
    assert not deterministic.kappa_nontrivial
    assert not deterministic.nonzero_root


def test_ld_moment_below_one_inside_window(bernoulli_moments):
    rho = solve_rho_k(bernoulli_moments, 1.1)
    for s in (0.2 * rho, 0.5 * rho, 0.9 * rho):
        assert log_ld_moment(bernoulli_moments, 1.1, s) < 0.0
    assert log_ld_moment(bernoulli_moments, 1.1, rho) == pytest.approx(0.0, abs=1e-12)
