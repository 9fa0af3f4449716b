"""
Hölder behaviour of the IDS at the critical energy: epsilon grids, the
weighted log-log fit of the IDS increment, and the explicit bound on it.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from app.engine.moments import MomentFunction, log_ld_moment, rho_k_window, solve_nu, solve_rho_k
from app.engine.pruefer import RotationRun, critical_ids, rotation_realizations
from app.engine.renewal import renewal_threshold
from app.errors import DomainError, UnderResolvedError
from app.models.analytics import HolderFit, RotationBoundReport
from app.models.polymer import PolymerEnsemble
from app.models.pruefer import max_epsilon
from app.models.transfer import CriticalData

logger = logging.getLogger(__name__)

RESOLUTION = 3.0
MIN_RESOLVED = 4


def geometric_grid(largest: float, points: int, ratio: float = 2.0) -> np.ndarray:
    """Ascending grid largest / ratio^(points-1), ..., largest / ratio, largest."""
    if largest <= 0 or points < 1 or ratio <= 1:
        raise DomainError("grid needs largest > 0, points >= 1 and ratio > 1")
    return largest / ratio ** np.arange(points - 1, -1, -1, dtype=float)


def default_grid(critical: CriticalData, k: float, points: int = 4, ratio: float = 2.0) -> np.ndarray:
    """Grid whose largest epsilon still satisfies the region ordering for k."""
    return geometric_grid(0.9 * max_epsilon(k, critical.C2, critical.C4), points, ratio)


def holder_fit(
    epsilons: Sequence[float],
    deltas: Sequence[float],
    stderrs: Sequence[float],
    floor: float = 0.0,
) -> HolderFit:
    """
    Weighted least-squares slope of log|delta| against log|eps|.

    A point is used when |delta| exceeds three standard errors and `floor`;
    the weight of log|delta| is |delta| / stderr. With every stderr zero the
    points are weighted equally.
    """
    eps = np.abs(np.asarray(epsilons, dtype=float))
    delta = np.abs(np.asarray(deltas, dtype=float))
    err = np.asarray(stderrs, dtype=float)
    resolved = (delta > RESOLUTION * err) & (delta > floor) & (delta > 0)
    if resolved.sum() < MIN_RESOLVED:
        usable = eps[resolved]
        smallest = float(usable.min()) if usable.size else None
        raise UnderResolvedError(
            f"only {int(resolved.sum())} of {eps.size} increments are resolved",
            smallest_usable_epsilon=smallest,
            resolved=int(resolved.sum()),
        )
    x = np.log(eps[resolved])
    y = np.log(delta[resolved])
    if np.all(err[resolved] == 0):
        coef, cov = np.polyfit(x, y, 1, cov=True)
    else:
        weights = delta[resolved] / np.maximum(err[resolved], np.finfo(float).tiny)
        coef, cov = np.polyfit(x, y, 1, w=weights, cov="unscaled")
    slope, intercept = float(coef[0]), float(coef[1])
    stderr = math.sqrt(max(float(cov[0, 0]), 0.0))
    logger.info("Hölder fit: slope %.4f +- %.4f over %d points", slope, stderr, x.size)
    return HolderFit(
        exponent=slope,
        stderr=stderr,
        intercept=intercept,
        epsilons=eps[resolved].tolist(),
        deltas=delta[resolved].tolist(),
        residuals=(y - (slope * x + intercept)).tolist(),
        resolved=int(resolved.sum()),
    )


def increments_from_run(run: RotationRun, base: float, mean_length: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    N(E_c + eps) - N(E_c) from a rotation run whose last column is eps = 0.

    The exact N(E_c) from the gap labels is the reference; the boundary term
    of each realization, read off its eps = 0 column, is removed. Returns
    (deltas, stderrs, floor) where floor is one half-turn of the pooled run
    per site, the smallest increment the run resolves.
    """
    boundary = run.ids[:, -1] - base
    values = run.ids[:, :-1] - base - boundary[:, None]
    reps = values.shape[0]
    deltas = values.mean(axis=0)
    stderrs = values.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else np.zeros(values.shape[1])
    floor = 1.0 / (mean_length * float(sum(run.steps)))
    return deltas, stderrs, floor


def ids_increments(
    sampling: PolymerEnsemble,
    critical_ensemble: PolymerEnsemble,
    critical: CriticalData,
    epsilons: Sequence[float],
    n_polymers: int,
    reps: int,
    seed: int,
    workers: int = 1,
) -> Tuple[np.ndarray, np.ndarray, float]:
    base = critical_ids(critical_ensemble, critical)
    run = rotation_realizations(sampling, critical, list(epsilons) + [0.0], n_polymers, reps, seed, workers)
    return increments_from_run(run, base, critical.mean_length)


def holder_from_rotation(
    sampling: PolymerEnsemble,
    critical_ensemble: PolymerEnsemble,
    critical: CriticalData,
    epsilons: Sequence[float],
    n_polymers: int,
    reps: int,
    seed: int,
    workers: int = 1,
) -> Tuple[HolderFit, List[dict]]:
    """Fit plus the per-epsilon rows that went into it."""
    deltas, stderrs, floor = ids_increments(
        sampling, critical_ensemble, critical, epsilons, n_polymers, reps, seed, workers
    )
    rows = []
    for eps, delta, err in zip(epsilons, deltas, stderrs):
        rows.append({
            "epsilon": float(eps),
            "ids_delta": float(delta),
            "stderr": float(err),
            "log_eps": math.log(abs(eps)),
            "log_delta": math.log(abs(delta)) if delta != 0 else float("-inf"),
        })
    return holder_fit(epsilons, deltas, stderrs, floor), rows


def rotation_bound(
    mf: MomentFunction,
    critical: CriticalData,
    k: float,
    xi: float,
    epsilon: float,
    rho: Optional[float] = None,
) -> float:
    """
    Bound on the rotation number per polymer step at E_c + epsilon:
    2 (2 C4^2 K^2 eps^2)^(rho - xi) / (1 - <(k kappa^2)^(rho - xi)>).
    """
    rho = solve_rho_k(mf, k) if rho is None else rho
    if not 0 < xi < rho:
        raise DomainError(f"xi must lie in (0, rho_k={rho:.6g}), got {xi}")
    s = rho - xi
    moment = math.exp(log_ld_moment(mf.oriented(), k, s))
    return 2.0 * renewal_threshold(critical, k, epsilon) ** s / (1.0 - moment)


def rotation_bound_report(
    mf: MomentFunction,
    critical: CriticalData,
    k: float,
    xi: float,
    epsilon: float,
    measured: float,
    rho: Optional[float] = None,
) -> RotationBoundReport:
    """`measured` is the IDS increment per site."""
    per_polymer = rotation_bound(mf, critical, k, xi, epsilon, rho)
    return RotationBoundReport(
        epsilon=epsilon,
        k=k,
        xi=xi,
        bound_per_polymer=per_polymer,
        bound_per_site=per_polymer / critical.mean_length,
        measured=abs(measured),
    )


def bound_exponent_pair(mf: MomentFunction, delta: float, nu: Optional[float] = None) -> Tuple[float, float]:
    """
    (k, xi) with 2 (rho_k - xi) = nu - delta: k is placed where
    2 rho_k = nu - delta / 2, which leaves xi = delta / 4.
    """
    nu = solve_nu(mf).nu if nu is None else nu
    if not 0 < delta < nu:
        raise DomainError(f"delta must lie in (0, nu={nu:.6g}), got {delta}")
    target = nu - delta / 2.0
    _, k_max = rho_k_window(mf)
    log_hi = math.log(k_max)

    def excess(log_k: float) -> float:
        return 2.0 * solve_rho_k(mf, math.exp(log_k), nu) - target

    # rho_k is ill-conditioned right at k_max
    k = math.exp(brentq(excess, log_hi * 1e-9, log_hi * (1.0 - 1e-4), xtol=1e-14))
    return k, delta / 4.0
