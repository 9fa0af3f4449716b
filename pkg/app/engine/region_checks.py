"""
Sampled property checks for the projective dynamics near E_c.

Every check returns a report; violations are counted, never raised.
"""
import logging
from typing import List

import numpy as np

from app.engine.dyson_schmidt import ds_step_D, mobius, region_codes
from app.engine.pruefer import MFrame, free_phase_at
from app.engine.sampling import RealizationStream, sample_polymers, sample_sites
from app.engine.spectral import JacobiMatrix, eigen_count
from app.engine.transfer import compute_critical_data, q_matrices
from app.errors import PseudogapError
from app.models.polymer import Polymer, PolymerEnsemble, WeightedPolymer
from app.models.pruefer import (
    ConeConditionSweep,
    OscillationReport,
    RegionCheckReport,
    RegionParams,
    max_epsilon,
)
from app.models.transfer import CriticalData

logger = logging.getLogger(__name__)


def unchecked_params(k: float, epsilon: float, critical: CriticalData) -> RegionParams:
    """RegionParams without the ordering check, for probing large epsilon."""
    return RegionParams.model_construct(
        k=k, epsilon=epsilon, C1=critical.C1, C2=critical.C2, C3=critical.C3, C4=critical.C4
    )


def _log_uniform(rng: np.random.Generator, low: float, high: float, size: int) -> np.ndarray:
    low, high = min(low, high), max(low, high)
    return np.exp(rng.uniform(np.log(low), np.log(high), size=size))


def _above_validity(params: RegionParams) -> bool:
    return params.epsilon >= max_epsilon(params.k, params.C2, params.C4) or params.lower >= params.upper


def check_maximum_factor(
    critical: CriticalData,
    params: RegionParams,
    samples: int,
    stream: RealizationStream,
    ensemble: PolymerEnsemble,
) -> RegionCheckReport:
    """
    Samples (sigma, x) pairs and counts violations of

    * Q x <= k x on [K eps, 1/(K eps)]
    * D Q x <= k kappa^2 x on the same interval
    * x > 0 and Q D x <= 0 only if D x > 1/(K eps)
    * x <= 0 implies Q x < K eps
    """
    rng = stream.generator
    batch = sample_polymers(ensemble, samples, stream)
    q, kappa = q_matrices(batch, critical, params.epsilon)
    lower, upper, k = params.lower, params.upper, params.k

    # Q x <= k x and D Q x <= k kappa^2 x
    x = _log_uniform(rng, lower, upper, samples)
    x[:2] = [lower, upper]
    qx = mobius(q, x)
    forward_ok = np.isfinite(qx) & (qx <= k * x * (1.0 + 1e-12))
    dqx = ds_step_D(qx, kappa)
    forward_d_ok = np.isfinite(dqx) & (dqx <= k * kappa**2 * x * (1.0 + 1e-12))
    margin = float(np.min((k * x - np.where(np.isfinite(qx), qx, np.inf)) / (k * x)))

    # into region I only through region IV
    pole = q[:, 1, 1] / q[:, 1, 0]
    near_pole = pole * rng.uniform(0.5, 3.0, size=samples) / kappa**2
    spread = _log_uniform(rng, lower * 1e-3, upper * 1e3, samples)
    entry_violations = 0
    for y in (near_pole, spread):
        y = np.where(y > 0, y, spread)
        dy = ds_step_D(y, kappa)
        qdy = mobius(q, dy)
        entered = np.isfinite(qdy) & (qdy <= 0.0)
        entry_violations += int(np.count_nonzero(entered & ~(dy > upper)))

    # leaving region I lands below K eps
    z = -_log_uniform(rng, lower * 1e-6, upper * 1e3, samples)
    z[0] = 0.0
    qz = mobius(q, z)
    exit_ok = np.isfinite(qz) & (qz < lower)

    violations = {
        "forward_growth": int(np.count_nonzero(~forward_ok)),
        "forward_growth_with_d": int(np.count_nonzero(~forward_d_ok)),
        "entry_via_iv": entry_violations,
        "exit_from_i": int(np.count_nonzero(~exit_ok)),
    }
    report = RegionCheckReport(
        name="maximum_factor",
        samples=samples,
        violations=violations,
        margin=margin,
        epsilon=params.epsilon,
        above_validity=_above_validity(params),
    )
    logger.info("maximum-factor check at eps=%g: %s", params.epsilon, violations)
    return report


def check_no_large_jump(
    critical: CriticalData,
    params: RegionParams,
    samples: int,
    stream: RealizationStream,
    ensemble: PolymerEnsemble,
) -> RegionCheckReport:
    """A state in region II that leaves it at the next half step lands in III<."""
    rng = stream.generator
    batch = sample_polymers(ensemble, 2 * samples, stream)
    q, kappa = q_matrices(batch, critical, params.epsilon)
    q_first, kappa_next = q[:samples], kappa[samples:]
    lower = params.lower

    x = _log_uniform(rng, lower * 1e-4, lower, samples)
    x = np.minimum(x, np.nextafter(lower, 0.0))

    # half-integer m: x(m + 1) = Q x, x(m + 3/2) = D Q x
    y = ds_step_D(mobius(q_first, x), kappa_next)
    # integer m: x(m + 1/2) = D x
    w = ds_step_D(x, kappa[:samples])

    violations = {}
    for name, value in (("half_step", y), ("integer_step", w)):
        codes = region_codes(value, params)
        left = codes != 1
        violations[name] = int(np.count_nonzero(left & (codes != 2)))
    return RegionCheckReport(
        name="no_large_forward_jump",
        samples=samples,
        violations=violations,
        epsilon=params.epsilon,
        above_validity=_above_validity(params),
    )


def oscillation_check(
    sampling: PolymerEnsemble,
    critical: CriticalData,
    triples: int,
    max_sites: int,
    seed: int,
    energy_window: float = 3.0,
) -> OscillationReport:
    """
    Compare theta^{0,E}(N) / pi and m(theta^{0,E}(N)) / pi with the Sturm
    count of H_N - E over random (realization, E, N).
    """
    frame = MFrame(critical.matrix)
    free_dev = modified_dev = 0.0
    free_bad = modified_bad = 0
    for index in range(triples):
        stream = RealizationStream(seed, index)
        rng = stream.generator
        n_sites = int(rng.integers(1, max_sites + 1))
        energy = float(rng.uniform(-energy_window, energy_window))
        t, v = sample_sites(sampling, n_sites, stream)
        count = eigen_count(JacobiMatrix.from_sequences(t, v), energy)
        theta = float(free_phase_at(t, v, energy))
        free = abs(theta / np.pi - count)
        modified = abs(float(frame.m(theta)) / np.pi - count)
        free_dev = max(free_dev, free)
        modified_dev = max(modified_dev, modified)
        free_bad += free > 0.5 + 1e-9
        modified_bad += modified > 2.5 + 1e-9
    return OscillationReport(
        triples=triples,
        free_max_deviation=free_dev,
        modified_max_deviation=modified_dev,
        free_violations=int(free_bad),
        modified_violations=int(modified_bad),
    )


def random_critical_ensemble(rng: np.random.Generator, max_atoms: int = 5) -> PolymerEnsemble:
    """Even-length zero-potential polymers: E = 0 is hyperbolic critical."""
    n_atoms = int(rng.integers(1, max_atoms + 1))
    weights = rng.dirichlet(np.ones(n_atoms))
    weights = weights / weights.sum()
    atoms = []
    for w in weights:
        length = int(rng.choice([2, 4, 6]))
        hoppings = rng.uniform(0.2, 3.0, size=length).tolist()
        atoms.append(WeightedPolymer(polymer=Polymer(hoppings=hoppings, potentials=[0.0] * length), weight=float(w)))
    total = sum(a.weight for a in atoms)
    atoms[-1] = WeightedPolymer(polymer=atoms[-1].polymer, weight=atoms[-1].weight + (1.0 - total))
    return PolymerEnsemble(atoms=atoms)


def cone_condition_sweep(ensembles: List[PolymerEnsemble], energy: float = 0.0) -> ConeConditionSweep:
    """a_sigma >= 0 and a_sigma^2 >= b_sigma^2 + c_sigma^2 over every atom."""
    min_a = np.inf
    min_disc = np.inf
    atoms = violations = used = 0
    for ensemble in ensembles:
        try:
            critical = compute_critical_data(ensemble, energy, allow_c_sigma=True)
        except PseudogapError as exc:
            logger.debug("skipping ensemble: %s", exc.message)
            continue
        used += 1
        for r in critical.records:
            atoms += 1
            disc = r.a**2 - r.b**2 - r.c**2
            min_a = min(min_a, r.a)
            min_disc = min(min_disc, disc / max(1.0, r.a**2))
            violations += (r.a < -1e-10) or (disc < -1e-8 * max(1.0, r.a**2))
    return ConeConditionSweep(
        ensembles=used,
        atoms=atoms,
        min_a=float(min_a),
        min_discriminant=float(min_disc),
        violations=int(violations),
    )
