"""
Polymer ensembles and seeded realizations.

A realization is an i.i.d. sequence of polymers drawn from a
`PolymerEnsemble`. Every realization owns one `RealizationStream`, keyed by
(seed, stream_index), so that a worker pool reproduces the serial result.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.errors import ConfigurationError, DomainError
from app.models.polymer import (
    DimerHoppingModel,
    DiscretePolymersModel,
    Polymer,
    PolymerEnsemble,
    WeightedPolymer,
    XDistributionKind,
)

logger = logging.getLogger(__name__)

SEED_MAX = 2**64 - 1


@dataclass
class RealizationStream:
    """Counter-based random stream for one realization."""
    seed: int
    stream_index: int = 0
    position: int = 0
    _generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 <= self.seed <= SEED_MAX:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.stream_index < 0:
            raise ConfigurationError(f"stream index must be non-negative, got {self.stream_index}")
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index,))
        self._generator = np.random.Generator(np.random.Philox(sequence))

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def advance(self, count: int) -> None:
        self.position += count


@dataclass(frozen=True)
class PolymerBatch:
    """
    Polymers stored as padded arrays.

    Row n holds polymer sigma_n; columns beyond lengths[n] are padding
    (hopping 1, potential 0) and never read.
    """
    lengths: np.ndarray
    hoppings: np.ndarray
    potentials: np.ndarray
    atom_index: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return int(self.lengths.shape[0])

    @property
    def n_sites(self) -> int:
        return int(self.lengths.sum())

    @property
    def boundaries(self) -> np.ndarray:
        """Site index at which each polymer starts, plus the total."""
        return np.concatenate(([0], np.cumsum(self.lengths)))

    def polymer(self, n: int) -> Polymer:
        length = int(self.lengths[n])
        return Polymer(
            hoppings=self.hoppings[n, :length].tolist(),
            potentials=self.potentials[n, :length].tolist(),
        )

    @classmethod
    def from_polymers(cls, polymers: Sequence[Polymer]) -> "PolymerBatch":
        width = max(p.length for p in polymers)
        lengths = np.array([p.length for p in polymers], dtype=np.int64)
        hoppings = np.ones((len(polymers), width))
        potentials = np.zeros((len(polymers), width))
        for n, p in enumerate(polymers):
            hoppings[n, : p.length] = p.hoppings
            potentials[n, : p.length] = p.potentials
        return cls(lengths, hoppings, potentials)


def _require_valid(ensemble: PolymerEnsemble) -> PolymerEnsemble:
    try:
        return PolymerEnsemble.model_validate(ensemble.model_dump())
    except ValidationError as exc:
        raise ConfigurationError(f"invalid polymer ensemble: {exc}") from exc


def _draw_x(model: DimerHoppingModel, rng: np.random.Generator, size) -> np.ndarray:
    if model.x_dist.kind == XDistributionKind.UNIFORM:
        return rng.uniform(-1.0, 1.0, size=size)
    return np.where(rng.random(size=size) < model.x_dist.p, 1.0, -1.0)


def sample_polymers(ensemble: PolymerEnsemble, count: int, stream: RealizationStream) -> PolymerBatch:
    """Draw `count` i.i.d. polymers from the ensemble."""
    if count <= 0:
        raise DomainError(f"count must be positive, got {count}")
    ensemble = _require_valid(ensemble)
    rng = stream.generator

    if ensemble.parametric is not None:
        model = ensemble.parametric
        x = _draw_x(model, rng, (count, 2))
        hoppings = np.empty((count, 2))
        hoppings[:, 0] = model.c_ev + model.lambda_ev * x[:, 0]
        hoppings[:, 1] = model.c_od + model.lambda_od * x[:, 1]
        batch = PolymerBatch(np.full(count, 2, dtype=np.int64), hoppings, np.zeros((count, 2)))
    else:
        table = PolymerBatch.from_polymers(ensemble.polymers)
        weights = np.asarray(ensemble.weights)
        index = rng.choice(len(weights), size=count, p=weights / weights.sum())
        batch = PolymerBatch(table.lengths[index], table.hoppings[index], table.potentials[index], index)

    stream.advance(count)
    return batch


def sample_sites(ensemble: PolymerEnsemble, n_sites: int, stream: RealizationStream) -> Tuple[np.ndarray, np.ndarray]:
    """Hoppings and potentials of the first `n_sites` sites of a realization."""
    count = -(-n_sites // ensemble.min_length())
    t, v = flatten(sample_polymers(ensemble, count, stream))
    return t[:n_sites], v[:n_sites]


def flatten(polymers: Union[PolymerBatch, Sequence[Polymer]]) -> Tuple[np.ndarray, np.ndarray]:
    """Concatenate polymers into site sequences t(0..N-1), v(0..N-1)."""
    batch = polymers if isinstance(polymers, PolymerBatch) else PolymerBatch.from_polymers(polymers)
    mask = np.arange(batch.hoppings.shape[1]) < batch.lengths[:, None]
    return batch.hoppings[mask], batch.potentials[mask]


def _dimer(t_ev: float, t_od: float) -> Polymer:
    return Polymer(hoppings=[t_ev, t_od], potentials=[0.0, 0.0])


def _merge_atoms(pairs: List[Tuple[float, float, float]]) -> List[WeightedPolymer]:
    merged = {}
    for t_ev, t_od, weight in pairs:
        if weight <= 0.0:
            continue
        merged[(t_ev, t_od)] = merged.get((t_ev, t_od), 0.0) + weight
    return [WeightedPolymer(polymer=_dimer(t_ev, t_od), weight=w) for (t_ev, t_od), w in merged.items()]


def _revalidate_model(model: DimerHoppingModel) -> DimerHoppingModel:
    try:
        return DimerHoppingModel.model_validate(model.model_dump())
    except ValidationError as exc:
        raise ConfigurationError(f"invalid dimer hopping model: {exc}") from exc


def dimer_to_ensemble(model: DimerHoppingModel, discretization: Optional[int] = None) -> PolymerEnsemble:
    """
    Ensemble of dimers (t_ev, t_od) with zero potentials.

    Bernoulli disorder gives at most four atoms. Uniform disorder gives a
    parametric ensemble unless `discretization` asks for Gauss-Legendre nodes.
    """
    model = _revalidate_model(model)
    corners = [
        _dimer(model.c_ev + s_ev * model.lambda_ev, model.c_od + s_od * model.lambda_od)
        for s_ev in (-1.0, 1.0)
        for s_od in (-1.0, 1.0)
    ]

    if model.lambda_ev == 0 and model.lambda_od == 0:
        atoms = _merge_atoms([(model.c_ev, model.c_od, 1.0)])
        return PolymerEnsemble(atoms=atoms, origin=model)

    if model.x_dist.kind == XDistributionKind.BERNOULLI:
        p = model.x_dist.p
        values_ev = [(model.c_ev + model.lambda_ev, p), (model.c_ev - model.lambda_ev, 1.0 - p)]
        values_od = [(model.c_od + model.lambda_od, p), (model.c_od - model.lambda_od, 1.0 - p)]
        atoms = _merge_atoms([(te, to, we * wo) for te, we in values_ev for to, wo in values_od])
        return PolymerEnsemble(atoms=atoms, origin=model)

    if discretization is None:
        return PolymerEnsemble(parametric=model, origin=model, support_corners=corners)
    if discretization <= 0:
        raise ConfigurationError(f"discretization must be positive, got {discretization}")

    nodes, weights = np.polynomial.legendre.leggauss(discretization)
    weights = weights / 2.0
    if model.lambda_od == 0:
        pairs = [(model.c_ev + model.lambda_ev * x, model.c_od, w) for x, w in zip(nodes, weights)]
    elif model.lambda_ev == 0:
        pairs = [(model.c_ev, model.c_od + model.lambda_od * x, w) for x, w in zip(nodes, weights)]
    else:
        pairs = [
            (model.c_ev + model.lambda_ev * xe, model.c_od + model.lambda_od * xo, we * wo)
            for xe, we in zip(nodes, weights)
            for xo, wo in zip(nodes, weights)
        ]
    atoms = _merge_atoms(pairs)
    # Quadrature weights sum to 1 only up to rounding.
    total = sum(a.weight for a in atoms)
    atoms = [WeightedPolymer(polymer=a.polymer, weight=a.weight / total) for a in atoms]
    logger.debug("discretized uniform dimer model into %d atoms", len(atoms))
    return PolymerEnsemble(atoms=atoms, origin=model, support_corners=corners)


def discrete_to_ensemble(model: DiscretePolymersModel) -> PolymerEnsemble:
    try:
        atoms = [
            WeightedPolymer(polymer=Polymer(hoppings=a.t, potentials=a.v), weight=a.weight)
            for a in model.atoms
        ]
        return PolymerEnsemble(atoms=atoms)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid discrete polymer model: {exc}") from exc


def build_ensembles(
    model: Union[DimerHoppingModel, DiscretePolymersModel], discretization: int
) -> Tuple[PolymerEnsemble, PolymerEnsemble]:
    """
    (sampling ensemble, critical ensemble).

    Both coincide unless the model is a continuous dimer model, in which case
    the critical ensemble is its quadrature discretization.
    """
    if isinstance(model, DiscretePolymersModel):
        ensemble = discrete_to_ensemble(model)
        return ensemble, ensemble
    sampling = dimer_to_ensemble(model)
    if sampling.is_discrete:
        return sampling, sampling
    return sampling, dimer_to_ensemble(model, discretization)
