"""
Prüfer phase dynamics.

Free phases follow the single-site transfers with the lift convention
theta(n+1) - theta(n) in (-pi/2, 3pi/2). M-modified phases are the image of
free phases under the increasing map m with r(theta) e_{m(theta)} = M e_theta.
Polymer phases subtract pi times the accumulated gap labels at polymer
boundaries.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import polar

from app.config import settings
from app.engine.sampling import PolymerBatch, RealizationStream, sample_polymers
from app.engine.transfer import inverse_unimodular
from app.errors import ConsistencyError
from app.models.polymer import Polymer, PolymerEnsemble
from app.models.transfer import CriticalData
from app.utils.parallel import RealizationPool

logger = logging.getLogger(__name__)

HALF_PI = np.pi / 2.0
TWO_PI = 2.0 * np.pi


def free_pruefer_step(theta, v, t, energy):
    """Image of the direction theta under the transfer at one site, elementwise."""
    return _site_step(theta, v, t, energy)[0]


def _site_step(theta, v, t, energy):
    cos, sin = np.cos(theta), np.sin(theta)
    x = ((v - energy) * cos - t * t * sin) / t
    y = cos / t
    lower = theta - HALF_PI
    return lower + np.mod(np.arctan2(y, x) - lower, TWO_PI), np.log(np.hypot(x, y))


class MFrame:
    """The phase map m induced by a unimodular M = R(phi0) P (polar form)."""

    def __init__(self, M: np.ndarray):
        self.M = np.asarray(M, dtype=float)
        self.M_inv = inverse_unimodular(self.M)
        rotation, self.P = polar(self.M)
        self.phi0 = float(np.arctan2(rotation[1, 0], rotation[0, 0]))
        base = self._stretch(0.0) + self.phi0
        self.offset = -TWO_PI * np.floor((base + np.pi) / TWO_PI)

    def _stretch(self, theta):
        w0 = self.P[0, 0] * np.cos(theta) + self.P[0, 1] * np.sin(theta)
        w1 = self.P[1, 0] * np.cos(theta) + self.P[1, 1] * np.sin(theta)
        delta = np.arctan2(w1, w0) - theta
        return theta + np.mod(delta + np.pi, TWO_PI) - np.pi

    def m(self, theta):
        return self._stretch(theta) + self.phi0 + self.offset

    def inverse(self, theta_m):
        """The lift theta with m(theta) = theta_m."""
        cos, sin = np.cos(theta_m), np.sin(theta_m)
        guess = np.arctan2(self.M_inv[1, 0] * cos + self.M_inv[1, 1] * sin,
                           self.M_inv[0, 0] * cos + self.M_inv[0, 1] * sin)
        return guess + np.pi * np.round((theta_m - self.m(guess)) / np.pi)

    def log_radius(self, theta):
        """log r(theta) = log |M e_theta|."""
        cos, sin = np.cos(theta), np.sin(theta)
        return np.log(np.hypot(self.M[0, 0] * cos + self.M[0, 1] * sin,
                               self.M[1, 0] * cos + self.M[1, 1] * sin))

    def slope(self, theta):
        """m'(theta) = r(theta)^-2."""
        return np.exp(-2.0 * self.log_radius(theta))


def m_modify(theta, M: np.ndarray):
    return MFrame(M).m(theta)


@dataclass(frozen=True)
class PrueferTrajectory:
    """
    Lifted phases and log-amplitudes at every step of a run.

    `theta` and `log_r` have shape (steps + 1,) or (steps + 1, n_energies).
    For polymer granularity `labels` holds the cumulative gap labels and
    `sites` the cumulative site counts, both of length steps + 1.
    """
    theta: np.ndarray
    log_r: np.ndarray
    granularity: str
    energies: np.ndarray
    labels: Optional[np.ndarray] = None
    sites: Optional[np.ndarray] = None

    @property
    def steps(self) -> int:
        return self.theta.shape[0] - 1

    @property
    def reduced(self) -> np.ndarray:
        """Polymer phase theta^eps(n) = theta^M(n) - pi * sum of gap labels."""
        if self.labels is None:
            return self.theta
        offset = np.pi * self.labels
        return self.theta - (offset[:, None] if self.theta.ndim == 2 else offset)

    def rotation_ids(self) -> np.ndarray:
        """(theta^M(N) - theta^M(0)) / (pi * number of sites), per energy."""
        n_sites = self.sites[-1] if self.sites is not None else self.steps
        return (self.theta[-1] - self.theta[0]) / (np.pi * n_sites)


def free_pruefer_run(t: np.ndarray, v: np.ndarray, energy, theta0: float = 0.0) -> PrueferTrajectory:
    """Free phases theta^{0,E}(0..N) for site sequences t, v."""
    energies = np.atleast_1d(np.asarray(energy, dtype=float))
    n = t.shape[0]
    theta = np.empty((n + 1, energies.shape[0]))
    log_r = np.zeros((n + 1, energies.shape[0]))
    theta[0] = theta0
    for j in range(n):
        theta[j + 1], growth = _site_step(theta[j], v[j], t[j], energies)
        log_r[j + 1] = log_r[j] + growth
    if np.ndim(energy) == 0:
        theta, log_r = theta[:, 0], log_r[:, 0]
    return PrueferTrajectory(theta=theta, log_r=log_r, granularity="site", energies=energies)


def free_phase_at(t: np.ndarray, v: np.ndarray, energy, theta0: float = 0.0):
    """theta^{0,E}(N) only, without storing the trajectory."""
    theta = np.full(np.shape(energy), theta0, dtype=float)
    for j in range(t.shape[0]):
        theta = free_pruefer_step(theta, v[j], t[j], energy)
    return theta


def gap_label(polymer: Polymer, critical: CriticalData) -> int:
    """
    Number of half-turns l_sigma of the critical transfer of one polymer.

    The free recursion starts from M^-1 e_{pi/2}, a fixed direction of every
    critical transfer, so the increment is an exact multiple of pi.
    """
    return int(batch_gap_labels(PolymerBatch.from_polymers([polymer]), critical)[0])


def batch_gap_labels(batch: PolymerBatch, critical: CriticalData) -> np.ndarray:
    frame = MFrame(critical.matrix)
    start = float(frame.inverse(HALF_PI))
    theta = np.full(len(batch), start)
    for j in range(batch.hoppings.shape[1]):
        active = batch.lengths > j
        stepped = free_pruefer_step(theta, batch.potentials[:, j], batch.hoppings[:, j], critical.energy)
        theta = np.where(active, stepped, theta)
    turns = (theta - start) / np.pi
    labels = np.round(turns)
    worst = float(np.abs(turns - labels).max())
    if worst > settings.GAP_LABEL_TOL:
        raise ConsistencyError(
            f"phase increment is {worst:.3g} away from a multiple of pi; the energy is not critical"
        )
    if np.any(labels < 0) or np.any(labels > batch.lengths):
        raise ConsistencyError("gap label outside 0..L")
    return labels.astype(np.int64)


def critical_ids(ensemble: PolymerEnsemble, critical: CriticalData) -> float:
    """IDS at the critical energy, <l> / <L>, from the atoms of a discrete ensemble."""
    atoms = PolymerBatch.from_polymers(ensemble.polymers)
    labels = batch_gap_labels(atoms, critical)
    weights = np.asarray(ensemble.weights)
    return float(np.dot(weights, labels) / np.dot(weights, atoms.lengths))


def polymer_pruefer_run(
    batch: PolymerBatch,
    critical: CriticalData,
    epsilon,
    theta0: Optional[float] = None,
    labels: Optional[np.ndarray] = None,
) -> PrueferTrajectory:
    """
    M-modified phases at polymer boundaries for energies E_c + epsilon.

    `theta0` is the initial M-modified phase, by default m(0), the image of
    the Dirichlet direction. The lift is carried site by site through the
    free recursion, so it is continuous; the gap labels are subtracted only
    in `PrueferTrajectory.reduced`.
    """
    frame = MFrame(critical.matrix)
    energies = critical.energy + np.atleast_1d(np.asarray(epsilon, dtype=float))
    if labels is None:
        labels = batch_gap_labels(batch, critical)
    start_m = frame.m(0.0) if theta0 is None else theta0

    count = len(batch)
    free = np.empty((count + 1, energies.shape[0]))
    free_log = np.zeros((count + 1, energies.shape[0]))
    free[0] = float(frame.inverse(start_m))

    lengths = batch.lengths.tolist()
    hoppings = batch.hoppings
    potentials = batch.potentials
    phase, amplitude = free[0], free_log[0]
    for n in range(count):
        for j in range(lengths[n]):
            phase, growth = _site_step(phase, potentials[n, j], hoppings[n, j], energies)
            amplitude = amplitude + growth
        free[n + 1] = phase
        free_log[n + 1] = amplitude

    theta = frame.m(free)
    log_r = free_log + frame.log_radius(free)

    if np.ndim(epsilon) == 0:
        theta, log_r = theta[:, 0], log_r[:, 0]
    return PrueferTrajectory(
        theta=theta,
        log_r=log_r,
        granularity="polymer",
        energies=energies,
        labels=np.concatenate(([0], np.cumsum(labels))),
        sites=batch.boundaries,
    )


def _column(trajectory: PrueferTrajectory, column: int) -> np.ndarray:
    reduced = trajectory.reduced
    return reduced[:, column] if reduced.ndim == 2 else reduced


def loop_direction(trajectory: PrueferTrajectory, column: int = 0) -> int:
    """Sign of the net winding of the polymer phase; +1 when it does not move."""
    reduced = _column(trajectory, column)
    return -1 if reduced[-1] < reduced[0] else 1


def detect_loops(trajectory: PrueferTrajectory, column: int = 0, direction: Optional[int] = None) -> np.ndarray:
    """
    Times between successive first passages of the polymer phase through
    new multiples of pi, counted in the direction of its drift.

    Below E_c the phase winds backwards; the passages are then those of the
    reflected lift, so loop times stay positive and `loop_direction` carries
    the sign.
    """
    if direction is None:
        direction = loop_direction(trajectory, column)
    reduced = direction * _column(trajectory, column)
    level = np.floor(reduced / np.pi)
    record = np.maximum.accumulate(level)
    gained = np.diff(record).astype(np.int64)
    times = np.repeat(np.arange(1, reduced.shape[0]), gained)
    return np.diff(np.concatenate(([0], times)))


@dataclass(frozen=True)
class RotationRun:
    """
    Per-realization results of `rotation_realizations`.

    `ids` (reps, n_eps) are IDS values per site from theta^M; `polymer_rates`
    (reps, n_eps) are the windings of the polymer phase per polymer step;
    `loops[rep][eps]` are loop-time arrays and `directions` (reps, n_eps)
    their winding signs.
    """
    ids: np.ndarray
    polymer_rates: np.ndarray
    loops: list
    steps: list
    directions: np.ndarray

    def direction(self, column: int) -> int:
        """Winding sign at one epsilon, by majority over realizations."""
        return -1 if self.directions[:, column].sum() < 0 else 1

    def winding(self, column: int) -> int:
        """Signed number of loops at one epsilon, summed over realizations."""
        return int(sum(d * len(loops[column]) for d, loops in zip(self.directions[:, column], self.loops)))


def _rotation_realization(index, sampling, critical, labels_by_atom, epsilons, n_polymers, seed, theta0):
    stream = RealizationStream(seed, index)
    batch = sample_polymers(sampling, n_polymers, stream)
    labels = None
    if labels_by_atom is not None and batch.atom_index is not None:
        labels = labels_by_atom[batch.atom_index]
    trajectory = polymer_pruefer_run(batch, critical, np.asarray(epsilons), theta0=theta0, labels=labels)
    reduced = trajectory.reduced
    rate = (reduced[-1] - reduced[0]) / (np.pi * len(batch))
    directions = [loop_direction(trajectory, c) for c in range(len(epsilons))]
    loops = [detect_loops(trajectory, c, d) for c, d in enumerate(directions)]
    return trajectory.rotation_ids(), rate, loops, len(batch), directions


def rotation_realizations(
    sampling: PolymerEnsemble,
    critical: CriticalData,
    epsilons,
    n_polymers: int,
    reps: int,
    seed: int,
    workers: int = 1,
    theta0: Optional[float] = None,
) -> RotationRun:
    """Run `reps` independent realizations at every epsilon."""
    labels_by_atom = None
    if sampling.is_discrete:
        labels_by_atom = batch_gap_labels(PolymerBatch.from_polymers(sampling.polymers), critical)
    results = RealizationPool(workers).map(
        _rotation_realization,
        range(reps),
        sampling,
        critical,
        labels_by_atom,
        list(epsilons),
        n_polymers,
        seed,
        theta0,
    )
    logger.info("rotation runs: %d realizations of %d polymers at %d energies", reps, n_polymers, len(epsilons))
    return RotationRun(
        ids=np.array([r[0] for r in results]),
        polymer_rates=np.array([r[1] for r in results]),
        loops=[r[2] for r in results],
        steps=[r[3] for r in results],
        directions=np.array([r[4] for r in results], dtype=np.int64),
    )
