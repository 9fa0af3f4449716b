"""
Renewal view of the rotations: loop-time statistics of the real dynamics,
the dominating interarrival times, and the large-deviation bounds on them.
"""
import logging
import math
from typing import Optional, Sequence

import numpy as np

from app.engine.moments import MomentFunction, log_ld_moment, solve_rho_k
from app.engine.sampling import RealizationStream, sample_polymers
from app.engine.transfer import polymer_records
from app.models.analytics import LDBoundReport, MeanInterarrivalReport, RenewalStats
from app.models.polymer import PolymerEnsemble
from app.models.transfer import CriticalData

logger = logging.getLogger(__name__)

Z_95 = 1.959963984540054


def renewal_stats(
    loop_times: Sequence[np.ndarray],
    steps: Sequence[int],
    epsilon: Optional[float] = None,
    k: Optional[float] = None,
    rotation_rate: Optional[float] = None,
    direction: int = 1,
) -> RenewalStats:
    """
    Pool loop times over realizations; zero loops give empty stats.

    `direction` is the winding sign of the loops, -1 below E_c.
    """
    pooled = np.concatenate([np.asarray(t, dtype=np.int64) for t in loop_times]) if loop_times else np.array([], dtype=np.int64)
    total_steps = int(sum(steps))
    if pooled.size == 0:
        logger.info("no completed loop in %d steps", total_steps)
        return RenewalStats(steps=total_steps, epsilon=epsilon, k=k, rotation_rate=rotation_rate, direction=direction)
    mean = float(pooled.mean())
    half_width = Z_95 * float(pooled.std(ddof=1)) / math.sqrt(pooled.size) if pooled.size > 1 else None
    return RenewalStats(
        interarrival=pooled.tolist(),
        loops=int(pooled.size),
        steps=total_steps,
        mean=mean,
        rate=1.0 / mean,
        half_width=half_width,
        epsilon=epsilon,
        k=k,
        rotation_rate=rotation_rate,
        direction=direction,
    )


def sample_kappas(
    sampling: PolymerEnsemble, critical: CriticalData, count: int, stream: RealizationStream
) -> np.ndarray:
    """kappa of `count` polymers drawn from the ensemble, in the frame of `critical`."""
    batch = sample_polymers(sampling, count, stream)
    if batch.atom_index is not None and len(critical.records) == len(sampling.atoms):
        return critical.kappas[batch.atom_index]
    return polymer_records(batch, critical)["kappa"]


def max_log_subarray(log_factors: np.ndarray, first: int = 3) -> np.ndarray:
    """
    Per row, the largest sum of log_factors over consecutive 1-based indices
    first <= N1 <= N2 <= N - 1, where N is the row length.
    """
    window = log_factors[:, first - 1: log_factors.shape[1] - 1]
    best = np.full(log_factors.shape[0], -np.inf)
    ending = np.full(log_factors.shape[0], -np.inf)
    for column in window.T:
        ending = np.maximum(column, ending + column)
        best = np.maximum(best, ending)
    return best


def ld_bound(mf: MomentFunction, k: float, rho: float, xi: float, zeta: float, length: int) -> float:
    """zeta^(rho - xi) N (<(k kappa^2)^(rho - xi)>^-1 - 1)^-1."""
    s = rho - xi
    moment = math.exp(log_ld_moment(mf.oriented(), k, s))
    return zeta**s * length / (1.0 / moment - 1.0)


def ld_bound_check(
    sampling: PolymerEnsemble,
    critical: CriticalData,
    mf: MomentFunction,
    k: float,
    xi: float,
    zeta: float,
    length: int,
    samples: int,
    seed: int,
    rho: Optional[float] = None,
    stream_index: int = 0,
) -> LDBoundReport:
    """
    Probability that some product of k kappa^2 over 2 < N1 <= N2 < N
    exceeds 1 / zeta, against its union bound.
    """
    rho = solve_rho_k(mf, k) if rho is None else rho
    stream = RealizationStream(seed, stream_index)
    kappas = sample_kappas(sampling, critical, samples * length, stream).reshape(samples, length)
    hits = max_log_subarray(math.log(k) + 2.0 * np.log(kappas)) > -math.log(zeta)
    p = float(hits.mean())
    return LDBoundReport(
        k=k,
        xi=xi,
        rho_k=rho,
        zeta=zeta,
        length=length,
        samples=samples,
        empirical=p,
        stderr=math.sqrt(max(p * (1.0 - p), 1.0 / samples) / samples),
        bound=ld_bound(mf, k, rho, xi, zeta, length),
    )


def renewal_threshold(critical: CriticalData, k: float, epsilon: float) -> float:
    """2 C4^2 K^2 eps^2."""
    K = 2.0 * critical.C2 / (1.0 - 1.0 / k)
    return 2.0 * critical.C4**2 * K**2 * epsilon**2


def sample_interarrival(
    sampling: PolymerEnsemble,
    critical: CriticalData,
    k: float,
    epsilon: float,
    count: int,
    max_steps: int,
    seed: int,
    stream_index: int = 0,
    block: int = 1024,
) -> np.ndarray:
    """
    Draws of X = min{N : some product of k kappa^2 over 2 < N1 <= N2 < N
    exceeds (2 C4^2 K^2 eps^2)^-1}. Draws not decided by `max_steps` are
    returned as max_steps (censored).
    """
    log_threshold = -math.log(renewal_threshold(critical, k, epsilon))
    stream = RealizationStream(seed, stream_index)
    result = np.full(count, max_steps, dtype=np.int64)
    open_rows = np.ones(count, dtype=bool)
    ending = np.full(count, -np.inf)
    n = 0
    while n < max_steps and open_rows.any():
        width = min(block, max_steps - n)
        logs = math.log(k) + 2.0 * np.log(sample_kappas(sampling, critical, count * width, stream).reshape(count, width))
        for column in logs.T:
            n += 1
            if n < 3:
                continue
            ending = np.maximum(column, ending + column)
            crossed = open_rows & (ending > log_threshold)
            result[crossed] = min(n + 1, max_steps)
            open_rows &= ~crossed
    censored = int(open_rows.sum())
    if censored:
        logger.info("%d of %d interarrival draws censored at %d steps", censored, count, max_steps)
    return result


def mean_interarrival_bound(mf: MomentFunction, critical: CriticalData, k: float, xi: float, epsilon: float, rho: Optional[float] = None) -> float:
    """1/2 (2 C4^2 K^2 eps^2)^(xi - rho) (1 - <(k kappa^2)^(rho - xi)>)."""
    rho = solve_rho_k(mf, k) if rho is None else rho
    moment = math.exp(log_ld_moment(mf.oriented(), k, rho - xi))
    return 0.5 * renewal_threshold(critical, k, epsilon) ** (xi - rho) * (1.0 - moment)


def mean_interarrival_check(
    stats: RenewalStats,
    mf: MomentFunction,
    critical: CriticalData,
    k: float,
    xi: Optional[float] = None,
    rho: Optional[float] = None,
) -> MeanInterarrivalReport:
    """Mean loop time of the dynamics against the lower bound on <X_1>."""
    rho = solve_rho_k(mf, k) if rho is None else rho
    xi = rho / 2.0 if xi is None else xi
    return MeanInterarrivalReport(
        epsilon=stats.epsilon,
        k=k,
        xi=xi,
        rho_k=rho,
        lower_bound=mean_interarrival_bound(mf, critical, k, xi, stats.epsilon, rho),
        empirical_mean=stats.mean,
        loops=stats.loops,
    )
