import numpy as np
import pytest

from app.engine.sampling import build_ensembles, dimer_to_ensemble
from app.engine.transfer import compute_critical_data
from app.models.polymer import (
    DimerHoppingModel,
    Polymer,
    PolymerEnsemble,
    WeightedPolymer,
    XDistribution,
    XDistributionKind,
)


@pytest.fixture(scope="session")
def uniform_model():
    """Uniform even hoppings on [0.8, 1.6], odd hoppings 1."""
    return DimerHoppingModel(c_ev=1.2, lambda_ev=0.4, c_od=1.0)


@pytest.fixture(scope="session")
def bernoulli_model():
    """Even hoppings 2.7 with probability 2/3, 0.1 otherwise; odd hoppings 1."""
    return DimerHoppingModel(
        c_ev=1.4,
        lambda_ev=1.3,
        c_od=1.0,
        x_dist=XDistribution(kind=XDistributionKind.BERNOULLI, p=2.0 / 3.0),
    )


@pytest.fixture(scope="session")
def uniform_ensembles(uniform_model):
    return build_ensembles(uniform_model, 16)


@pytest.fixture(scope="session")
def uniform_critical(uniform_ensembles):
    return compute_critical_data(uniform_ensembles[1], 0.0)


@pytest.fixture(scope="session")
def bernoulli_ensemble(bernoulli_model):
    return dimer_to_ensemble(bernoulli_model)


@pytest.fixture(scope="session")
def bernoulli_critical(bernoulli_ensemble):
    return compute_critical_data(bernoulli_ensemble, 0.0)


@pytest.fixture(scope="session")
def laplacian_ensemble():
    return PolymerEnsemble(atoms=[WeightedPolymer(polymer=Polymer(hoppings=[1.0], potentials=[0.0]), weight=1.0)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
