import math

import numpy as np
import pytest
from scipy.integrate import quad

from app.engine.sampling import PolymerBatch, RealizationStream, dimer_to_ensemble, sample_polymers
from app.engine.transfer import (
    batch_transfer,
    compute_critical_data,
    decompose,
    detect_critical,
    inverse_unimodular,
    operator_norm,
    polymer_transfer,
    polymer_transfer_derivative,
    q_matrices,
    second_order_terms,
    single_site_transfer,
    transfer_product_norm,
)
from app.errors import (
    ConsistencyError,
    DegenerateEnsembleError,
    DomainError,
    UnsupportedCaseError,
    UnsupportedOperationError,
)
from app.models.polymer import DimerHoppingModel, Polymer, PolymerEnsemble, WeightedPolymer


def _dimer(t_ev, t_od):
    return Polymer(hoppings=[t_ev, t_od], potentials=[0.0, 0.0])


def test_single_site_transfer_is_unimodular():
    m = single_site_transfer(0.3, 1.7, -0.4)
    assert np.linalg.det(m) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        single_site_transfer(0.0, 0.0, 0.0)


def test_dimer_transfer_is_diagonal_at_zero():
    m = polymer_transfer(_dimer(2.0, 0.5), 0.0)
    np.testing.assert_allclose(m, [[-0.25, 0.0], [0.0, -4.0]], atol=1e-15)


def test_derivative_matches_finite_difference():
    polymer = Polymer(hoppings=[0.7, 1.3, 2.1], potentials=[0.2, -0.5, 0.1])
    _, slope = polymer_transfer_derivative(polymer, 0.4)
    h = 1e-6
    numeric = (polymer_transfer(polymer, 0.4 + h) - polymer_transfer(polymer, 0.4 - h)) / (2 * h)
    np.testing.assert_allclose(slope, numeric, atol=1e-7)


def test_batch_transfer_matches_single(rng):
    polymers = [
        Polymer(hoppings=list(rng.uniform(0.5, 2.0, size=n)), potentials=list(rng.normal(size=n)))
        for n in (1, 3, 2, 5)
    ]
    values, slopes = batch_transfer(PolymerBatch.from_polymers(polymers), 0.7)
    for p, value, slope in zip(polymers, values, slopes):
        expected_value, expected_slope = polymer_transfer_derivative(p, 0.7)
        np.testing.assert_allclose(value, expected_value, atol=1e-12)
        np.testing.assert_allclose(slope, expected_slope, atol=1e-12)


def test_operator_norm_and_inverse(rng):
    m = rng.normal(size=(2, 2))
    m = m / math.sqrt(abs(np.linalg.det(m)))
    if np.linalg.det(m) < 0:
        m[:, 0] *= -1
    assert float(operator_norm(m)) == pytest.approx(np.linalg.norm(m, 2))
    np.testing.assert_allclose(inverse_unimodular(m) @ m, np.eye(2), atol=1e-12)


def test_decompose_recovers_basis_coefficients():
    x = 0.5 * np.eye(2) + 1.5 * np.array([[0, -1], [1, 0]]) + 0.25 * np.array([[0, 1], [1, 0]]) - 2.0 * np.diag([1, -1])
    np.testing.assert_allclose(decompose(x), (0.5, 1.5, 0.25, -2.0))


def test_dimer_ensemble_is_critical_only_at_zero(bernoulli_ensemble):
    assert detect_critical(bernoulli_ensemble, 0.0).is_critical
    assert not detect_critical(bernoulli_ensemble, 0.3).is_critical
    with pytest.raises(ConsistencyError):
        compute_critical_data(bernoulli_ensemble, 0.3)


def test_parametric_ensemble_needs_discretization(uniform_ensembles):
    with pytest.raises(UnsupportedOperationError):
        detect_critical(uniform_ensembles[0], 0.0)


def test_bernoulli_critical_data(bernoulli_critical):
    assert bernoulli_critical.orientation_swapped
    np.testing.assert_allclose(sorted(bernoulli_critical.kappas), [0.1, 2.7], rtol=1e-12)
    expected = (2.0 / 3.0) * math.log(2.7) + (1.0 / 3.0) * math.log(0.1)
    assert bernoulli_critical.gamma0 == pytest.approx(expected, rel=1e-12)
    assert bernoulli_critical.C4 == pytest.approx(2.7)
    assert bernoulli_critical.C1 == pytest.approx(1.0, abs=1e-9)
    assert bernoulli_critical.C2 == pytest.approx(1.0, abs=1e-9)
    assert bernoulli_critical.mean_length == 2.0


def test_uniform_gamma0_matches_quadrature(uniform_critical):
    mean_log, _ = quad(math.log, 0.8, 1.6)
    assert not uniform_critical.orientation_swapped
    assert uniform_critical.gamma0 == pytest.approx(-mean_log / 0.8, abs=1e-10)
    assert uniform_critical.C4 == pytest.approx(1.25)


def test_records_satisfy_positivity(uniform_critical, bernoulli_critical):
    for critical in (uniform_critical, bernoulli_critical):
        for r in critical.records + critical.corners:
            assert r.a >= -1e-10
            assert r.a**2 - r.b**2 - r.c**2 >= -1e-8
            assert r.sign == -1


def test_q_matrices_expand_to_first_order(bernoulli_critical, bernoulli_ensemble):
    batch = PolymerBatch.from_polymers(bernoulli_ensemble.polymers)
    eps = 1e-5
    q, _ = q_matrices(batch, bernoulli_critical, eps)
    np.testing.assert_allclose(q, np.broadcast_to(np.eye(2), q.shape), atol=1e-3)
    for r, qm in zip(bernoulli_critical.records, q):
        _, a, b, _ = decompose((qm - np.eye(2)) / eps)
        assert a == pytest.approx(r.a, rel=1e-3)
        assert b == pytest.approx(r.b, abs=1e-3)
    second = second_order_terms(batch, bernoulli_critical, 1e-3)
    assert np.all(operator_norm(second) <= bernoulli_critical.C3 * 1.5 + 1e-9)


def test_expansion_residual_is_second_order(bernoulli_critical, bernoulli_ensemble):
    batch = PolymerBatch.from_polymers(bernoulli_ensemble.polymers)
    epsilons = np.geomspace(1e-4, 1e-2, 5)
    residuals = [float(operator_norm(second_order_terms(batch, bernoulli_critical, e)).max()) * e * e for e in epsilons]
    slope = np.polyfit(np.log(epsilons), np.log(residuals), 1)[0]
    assert slope >= 1.9


def test_identity_atoms_only_is_degenerate():
    ensemble = PolymerEnsemble(atoms=[WeightedPolymer(polymer=_dimer(1.0, 1.0), weight=1.0)])
    with pytest.raises(DegenerateEnsembleError):
        compute_critical_data(ensemble, 0.0)


def test_zero_drift_is_unsupported():
    ensemble = PolymerEnsemble(atoms=[
        WeightedPolymer(polymer=_dimer(2.0, 1.0), weight=0.5),
        WeightedPolymer(polymer=_dimer(1.0, 2.0), weight=0.5),
    ])
    with pytest.raises(UnsupportedCaseError):
        compute_critical_data(ensemble, 0.0)


def test_deterministic_product_norm():
    polymers = [_dimer(2.0, 1.0)] * 40
    growth = transfer_product_norm(polymers, 0.0)
    assert growth == pytest.approx(40 * math.log(2.0), rel=1e-12)
    both = transfer_product_norm(polymers, np.array([0.0, 0.0]), renorm_every=3)
    np.testing.assert_allclose(both, 40 * math.log(2.0), rtol=1e-12)


def test_bernoulli_with_degenerate_p_is_single_atom():
    model = DimerHoppingModel(c_ev=1.4, lambda_ev=1.3, c_od=1.0, x_dist={"kind": "bernoulli", "p": 1.0})
    ensemble = dimer_to_ensemble(model)
    assert len(ensemble.atoms) == 1
    critical = compute_critical_data(ensemble, 0.0)
    assert critical.kappas[0] == pytest.approx(1.0 / 2.7)


def test_product_norm_matches_direct_product():
    polymer = Polymer(hoppings=[0.7, 1.3, 2.1], potentials=[0.2, -0.5, 0.1])
    direct = single_site_transfer(0.1, 2.1, 0.4) @ single_site_transfer(-0.5, 1.3, 0.4) @ single_site_transfer(0.2, 0.7, 0.4)
    expected = math.log(np.linalg.norm(direct, 2))
    assert transfer_product_norm([polymer], 0.4) == pytest.approx(expected, abs=1e-12)
    assert transfer_product_norm([polymer], 0.4, renorm_every=2) == pytest.approx(expected, abs=1e-12)


def test_product_norm_grows_outside_the_spectrum(bernoulli_ensemble):
    batch = sample_polymers(bernoulli_ensemble, 200, RealizationStream(3))
    growth = transfer_product_norm(batch, 10.0)
    assert growth > 0.0
    assert growth / batch.n_sites > 1.0
