import numpy as np
import pytest
from pydantic import ValidationError

from app.engine.sampling import (
    PolymerBatch,
    RealizationStream,
    build_ensembles,
    dimer_to_ensemble,
    flatten,
    sample_polymers,
    sample_sites,
)
from app.errors import ConfigurationError, DomainError
from app.models.polymer import DimerHoppingModel, Polymer, PolymerEnsemble, WeightedPolymer


def test_same_stream_reproduces_batch(bernoulli_ensemble):
    first = sample_polymers(bernoulli_ensemble, 500, RealizationStream(7, 3))
    second = sample_polymers(bernoulli_ensemble, 500, RealizationStream(7, 3))
    np.testing.assert_array_equal(first.hoppings, second.hoppings)
    np.testing.assert_array_equal(first.atom_index, second.atom_index)


def test_streams_differ_by_index(bernoulli_ensemble):
    first = sample_polymers(bernoulli_ensemble, 500, RealizationStream(7, 0))
    second = sample_polymers(bernoulli_ensemble, 500, RealizationStream(7, 1))
    assert not np.array_equal(first.atom_index, second.atom_index)


def test_bernoulli_dimer_has_two_atoms(bernoulli_ensemble):
    pairs = sorted((a.polymer.hoppings[0], a.weight) for a in bernoulli_ensemble.atoms)
    assert len(pairs) == 2
    assert pairs[0][0] == pytest.approx(0.1)
    assert pairs[0][1] == pytest.approx(1.0 / 3.0)
    assert pairs[1][0] == pytest.approx(2.7)
    assert pairs[1][1] == pytest.approx(2.0 / 3.0)
    assert all(a.polymer.hoppings[1] == 1.0 for a in bernoulli_ensemble.atoms)


def test_uniform_dimer_is_parametric_until_discretized(uniform_model):
    sampling, critical = build_ensembles(uniform_model, 16)
    assert not sampling.is_discrete
    assert len(sampling.support_corners) == 4
    assert critical.is_discrete
    assert len(critical.atoms) == 16
    assert sum(critical.weights) == pytest.approx(1.0, abs=1e-12)
    assert critical.mean_length() == 2.0


def test_uniform_samples_stay_in_support(uniform_ensembles):
    sampling, _ = uniform_ensembles
    batch = sample_polymers(sampling, 2000, RealizationStream(1))
    assert batch.hoppings[:, 0].min() >= 0.8
    assert batch.hoppings[:, 0].max() <= 1.6
    np.testing.assert_array_equal(batch.hoppings[:, 1], 1.0)


def test_sample_sites_alternates_hoppings(uniform_ensembles):
    t, v = sample_sites(uniform_ensembles[0], 101, RealizationStream(11))
    assert t.shape == (101,)
    np.testing.assert_array_equal(t[1::2], 1.0)
    np.testing.assert_array_equal(v, 0.0)


def test_flatten_respects_lengths():
    polymers = [Polymer(hoppings=[1.0, 2.0, 3.0], potentials=[0.1, 0.2, 0.3]), Polymer(hoppings=[4.0], potentials=[0.4])]
    t, v = flatten(polymers)
    np.testing.assert_array_equal(t, [1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(v, [0.1, 0.2, 0.3, 0.4])
    batch = PolymerBatch.from_polymers(polymers)
    np.testing.assert_array_equal(batch.boundaries, [0, 3, 4])
    assert batch.polymer(1) == polymers[1]


def test_discrete_weights_follow_ensemble():
    ensemble = PolymerEnsemble(atoms=[
        WeightedPolymer(polymer=Polymer(hoppings=[1.0, 2.0], potentials=[0.0, 0.0]), weight=0.25),
        WeightedPolymer(polymer=Polymer(hoppings=[2.0, 1.0, 1.0, 1.0], potentials=[0.0] * 4), weight=0.75),
    ])
    batch = sample_polymers(ensemble, 20000, RealizationStream(5))
    assert np.mean(batch.atom_index == 1) == pytest.approx(0.75, abs=0.02)
    assert ensemble.mean_length() == pytest.approx(3.5)


def test_invalid_models_are_rejected():
    with pytest.raises(ValidationError):
        DimerHoppingModel(c_ev=1.0, lambda_ev=1.0, c_od=1.0)
    with pytest.raises(ValidationError):
        Polymer(hoppings=[1.0, -1.0], potentials=[0.0, 0.0])
    with pytest.raises(ValidationError):
        Polymer(hoppings=[1.0] * 9, potentials=[0.0] * 9)
    with pytest.raises(ValidationError):
        PolymerEnsemble(atoms=[WeightedPolymer(polymer=Polymer(hoppings=[1.0], potentials=[0.0]), weight=0.5)])


def test_non_positive_count_and_bad_seed(bernoulli_ensemble):
    with pytest.raises(DomainError):
        sample_polymers(bernoulli_ensemble, 0, RealizationStream(1))
    with pytest.raises(ConfigurationError):
        RealizationStream(-1)


def test_deterministic_dimer_is_one_atom():
    ensemble = dimer_to_ensemble(DimerHoppingModel(c_ev=2.0, lambda_ev=0.0, c_od=1.0))
    assert len(ensemble.atoms) == 1
    assert ensemble.atoms[0].weight == 1.0
