import numpy as np
import pytest

from app.engine.region_checks import (
    check_maximum_factor,
    check_no_large_jump,
    cone_condition_sweep,
    oscillation_check,
    random_critical_ensemble,
    unchecked_params,
)
from app.engine.sampling import RealizationStream
from app.models.pruefer import RegionParams


@pytest.fixture(scope="module")
def uniform_params(uniform_critical):
    return RegionParams.build(2.0, 0.02, uniform_critical)


def test_maximum_factor_holds_for_uniform_dimers(uniform_ensembles, uniform_critical, uniform_params):
    report = check_maximum_factor(uniform_critical, uniform_params, 10_000, RealizationStream(17), uniform_ensembles[0])
    assert report.samples == 10_000
    assert report.violations == {
        "forward_growth": 0,
        "forward_growth_with_d": 0,
        "entry_via_iv": 0,
        "exit_from_i": 0,
    }
    assert report.margin > 0
    assert not report.above_validity
    assert report.passed


def test_maximum_factor_holds_for_bernoulli_dimers(bernoulli_ensemble, bernoulli_critical):
    params = RegionParams.build(1.2, 0.001, bernoulli_critical)
    report = check_maximum_factor(bernoulli_critical, params, 5_000, RealizationStream(18), bernoulli_ensemble)
    assert report.passed


def test_no_large_forward_jump(uniform_ensembles, uniform_critical, uniform_params):
    report = check_no_large_jump(uniform_critical, uniform_params, 10_000, RealizationStream(19), uniform_ensembles[0])
    assert set(report.violations) == {"half_step", "integer_step"}
    assert report.passed


def test_unchecked_params_flag_large_epsilon(uniform_ensembles, uniform_critical):
    params = unchecked_params(2.0, 0.5, uniform_critical)
    assert params.lower > params.upper
    report = check_no_large_jump(uniform_critical, params, 200, RealizationStream(20), uniform_ensembles[0])
    assert report.above_validity


def test_oscillation_bounds(uniform_ensembles, uniform_critical):
    report = oscillation_check(uniform_ensembles[0], uniform_critical, triples=300, max_sites=200, seed=5)
    assert report.triples == 300
    assert report.free_max_deviation <= 0.5 + 1e-9
    assert report.passed


def test_random_ensembles_satisfy_positivity():
    rng = np.random.default_rng(99)
    ensembles = [random_critical_ensemble(rng) for _ in range(40)]
    for ensemble in ensembles:
        assert all(len(p.hoppings) % 2 == 0 for p in ensemble.polymers)
        assert sum(ensemble.weights) == pytest.approx(1.0)
    sweep = cone_condition_sweep(ensembles)
    assert sweep.ensembles >= 10
    assert sweep.atoms >= sweep.ensembles
    assert sweep.min_a >= -1e-10
    assert sweep.passed
