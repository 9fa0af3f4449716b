"""
Command services shared by the CLI and the HTTP app.

Each `run_*` function takes a `RunContext` and returns models or plain rows;
writing files is left to the caller.
"""
import logging
import math
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.engine.dyson_schmidt import REGION_CODES, phase_to_x, region_codes
from app.engine.holder import (
    bound_exponent_pair,
    default_grid,
    holder_from_rotation,
    increments_from_run,
    rotation_bound_report,
)
from app.engine.moments import (
    MomentFunction,
    hypothesis_report,
    rho_k_window,
    solve_nu,
    solve_rho_k,
)
from app.engine.pruefer import (
    critical_ids,
    polymer_pruefer_run,
    rotation_realizations,
)
from app.engine.region_checks import (
    check_maximum_factor,
    check_no_large_jump,
    cone_condition_sweep,
    oscillation_check,
    random_critical_ensemble,
    unchecked_params,
)
from app.engine.renewal import (
    ld_bound_check,
    mean_interarrival_check,
    renewal_stats,
    sample_interarrival,
)
from app.engine.sampling import RealizationStream, build_ensembles, sample_polymers, sample_sites
from app.engine.spectral import (
    JacobiMatrix,
    eigenvalues,
    histogram,
    ids_by_counting,
    lyapunov,
    thouless_residual,
)
from app.engine.transfer import compute_critical_data, detect_critical
from app.errors import ConfigurationError, DomainError
from app.models.analytics import HolderFit, NuSolution
from app.models.polymer import DimerHoppingModel
from app.models.pruefer import RegionParams
from app.models.run import CommandName, RunConfig, VerifyReport
from app.models.spectral import IDSCurve, LyapunovPoint, SpectralHistogram, ThoulessReport
from app.models.transfer import CriticalData
from app.utils.parallel import RealizationPool

logger = logging.getLogger(__name__)

# stream index blocks keep the draws of the verify suites apart
CHECK_STREAMS = 1_000_000
SWEEP_STREAMS = 2_000_000
LD_STREAMS = 3_000_000


class RunContext:
    """Ensembles, critical data and moments of one run, built on first use."""

    def __init__(self, config: RunConfig, command: Optional[CommandName] = None):
        self.config = config
        self.command = command
        if command is not None and command.stochastic and config.seed is None:
            raise ConfigurationError(f"command '{command.value}' needs a seed", field="seed")
        self.sampling, self.critical_ensemble = build_ensembles(config.model, config.discretization)

    @property
    def seed(self) -> int:
        if self.config.seed is None:
            raise ConfigurationError("this operation needs a seed", field="seed")
        return self.config.seed

    @cached_property
    def critical(self) -> CriticalData:
        return compute_critical_data(
            self.critical_ensemble, self.config.energy_critical, allow_c_sigma=self.config.allow_c_sigma
        )

    @cached_property
    def moments(self) -> MomentFunction:
        """Closed form for dimer models at E = 0, exact atom sums otherwise."""
        model = self.config.model
        if isinstance(model, DimerHoppingModel) and self.config.energy_critical == 0.0:
            return MomentFunction.from_model(model)
        return MomentFunction.from_critical(self.critical)

    @cached_property
    def nu(self) -> NuSolution:
        return solve_nu(self.moments)

    @cached_property
    def k_rho(self) -> float:
        """k for the large-deviation exponent; the middle of its window unless configured."""
        if self.config.delta is not None:
            return self._exponent_pair[0]
        if self.config.k_rho is not None:
            return self.config.k_rho
        _, k_max = rho_k_window(self.moments)
        return 1.0 + (k_max - 1.0) / 2.0

    @cached_property
    def rho(self) -> float:
        return solve_rho_k(self.moments, self.k_rho, self.nu.nu)

    @cached_property
    def xi(self) -> float:
        if self.config.delta is not None:
            return self._exponent_pair[1]
        xi = self.rho / 2.0 if self.config.xi is None else self.config.xi
        if not 0 < xi < self.rho:
            raise DomainError(f"xi must lie in (0, rho_k={self.rho:.6g}), got {xi}")
        return xi

    @cached_property
    def _exponent_pair(self) -> Tuple[float, float]:
        return bound_exponent_pair(self.moments, self.config.delta, self.nu.nu)

    def region_params(self, epsilon: float) -> RegionParams:
        """Validated parameters, or unchecked ones flagged above validity."""
        try:
            return RegionParams.build(self.config.k, abs(epsilon), self.critical)
        except DomainError as exc:
            logger.warning("%s; checks at this epsilon are reported above validity", exc.message)
            return unchecked_params(self.config.k, abs(epsilon), self.critical)


def _spectrum_realization(index, ensemble, n_sites, seed):
    t, v = sample_sites(ensemble, n_sites, RealizationStream(seed, index))
    return eigenvalues(JacobiMatrix.from_sequences(t, v))


def run_spectrum(ctx: RunContext) -> Tuple[List[np.ndarray], SpectralHistogram]:
    cfg = ctx.config
    spectra = RealizationPool(cfg.workers).map(_spectrum_realization, range(cfg.reps), ctx.sampling, cfg.n_sites, ctx.seed)
    return spectra, histogram(np.concatenate(spectra), bins=cfg.bins, normalized=cfg.normalized)


def run_ids(ctx: RunContext) -> IDSCurve:
    cfg = ctx.config
    return ids_by_counting(ctx.sampling, cfg.grid(), cfg.n_sites, cfg.reps, ctx.seed, cfg.workers)


def _stderr(values: np.ndarray) -> np.ndarray:
    if values.shape[0] < 2:
        return np.zeros(values.shape[1:])
    return values.std(axis=0, ddof=1) / math.sqrt(values.shape[0])


def run_rotation(ctx: RunContext) -> List[Dict]:
    """IDS at E_c + eps from the rotation of the M-modified phase."""
    cfg = ctx.config
    run = rotation_realizations(
        ctx.sampling, ctx.critical, cfg.epsilons, cfg.n_polymers, cfg.reps, ctx.seed, cfg.workers, cfg.theta0
    )
    means, errors = run.ids.mean(axis=0), _stderr(run.ids)
    rows = []
    for c, eps in enumerate(cfg.epsilons):
        rows.append({
            "epsilon": eps,
            "energy": ctx.critical.energy + eps,
            "ids": float(means[c]),
            "stderr": float(errors[c]),
            "loops": int(sum(len(loops[c]) for loops in run.loops)),
            "winding": run.winding(c),
            "steps": int(sum(run.steps)),
        })
    return rows


def run_nu(ctx: RunContext) -> Dict:
    solution = ctx.nu
    payload = solution.model_dump(mode="json")
    payload["hypotheses"] = hypothesis_report(ctx.moments).model_dump(mode="json")
    return payload


def run_lyapunov(ctx: RunContext) -> Tuple[List[LyapunovPoint], Optional[ThoulessReport]]:
    cfg = ctx.config
    points = lyapunov(ctx.sampling, cfg.grid(), cfg.n_polymers, cfg.reps, ctx.seed, cfg.workers)
    thouless = None
    if cfg.thouless_sizes:
        thouless = thouless_residual(ctx.sampling, cfg.grid()[0], cfg.thouless_sizes, cfg.reps, ctx.seed, cfg.workers)
    return points, thouless


def run_renewal(ctx: RunContext) -> List[Dict]:
    """Loop statistics of the polymer phase, the interarrival sampler and the mean-time bound."""
    cfg = ctx.config
    run = rotation_realizations(
        ctx.sampling, ctx.critical, cfg.epsilons, cfg.n_polymers, cfg.reps, ctx.seed, cfg.workers, cfg.theta0
    )
    rows = []
    for c, eps in enumerate(cfg.epsilons):
        stats = renewal_stats(
            [loops[c] for loops in run.loops],
            run.steps,
            epsilon=eps,
            k=ctx.k_rho,
            rotation_rate=float(run.polymer_rates[:, c].mean()),
            direction=run.direction(c),
        )
        check = mean_interarrival_check(stats, ctx.moments, ctx.critical, ctx.k_rho, ctx.xi, ctx.rho)
        draws = sample_interarrival(
            ctx.sampling, ctx.critical, ctx.k_rho, abs(eps), cfg.interarrival_samples, cfg.max_steps,
            ctx.seed, stream_index=LD_STREAMS + c,
        )
        rows.append({
            "epsilon": eps,
            "loops": stats.loops,
            "winding": stats.winding,
            "steps": stats.steps,
            "mean": stats.mean,
            "rate": stats.rate,
            "half_width": stats.half_width,
            "rotation_rate": stats.rotation_rate,
            "interarrival_mean": float(draws.mean()),
            "censored": int(np.count_nonzero(draws >= cfg.max_steps)),
            "lower_bound": check.lower_bound,
        })
    return rows


def run_holder(ctx: RunContext) -> Tuple[HolderFit, List[Dict]]:
    cfg = ctx.config
    epsilons = cfg.epsilons if len(cfg.epsilons) >= 4 else default_grid(ctx.critical, cfg.k).tolist()
    return holder_from_rotation(
        ctx.sampling, ctx.critical_ensemble, ctx.critical, epsilons, cfg.n_polymers, cfg.reps, ctx.seed, cfg.workers
    )


def run_criticaldata(ctx: RunContext) -> Dict:
    payload = ctx.critical.model_dump(mode="json")
    payload["criticality"] = detect_critical(ctx.critical_ensemble, ctx.critical.energy).model_dump(mode="json")
    return payload


def run_trajectory(ctx: RunContext) -> List[Dict]:
    """Polymer-phase samples of one realization at the first epsilon."""
    cfg = ctx.config
    eps = cfg.epsilons[0]
    batch = sample_polymers(ctx.sampling, cfg.n_polymers, RealizationStream(ctx.seed, 0))
    trajectory = polymer_pruefer_run(batch, ctx.critical, eps, theta0=cfg.theta0)
    reduced = trajectory.reduced
    x = phase_to_x(reduced)
    codes = region_codes(x, ctx.region_params(eps))
    winding = np.floor((reduced - reduced[0]) / np.pi).astype(np.int64)
    return [
        {
            "step": n,
            "theta_lift": float(reduced[n]),
            "theta_mod_pi": float(np.mod(reduced[n], np.pi)),
            "log_R": float(trajectory.log_r[n]),
            "x": float(x[n]),
            "region": REGION_CODES[int(codes[n])].value,
            "winding": int(winding[n]),
        }
        for n in range(reduced.shape[0])
    ]


def run_verify(ctx: RunContext) -> VerifyReport:
    """Every sampled property check; violations are reported, not raised."""
    cfg = ctx.config
    seed = ctx.seed
    report = VerifyReport(hypotheses=hypothesis_report(ctx.moments))

    for i, eps in enumerate(cfg.epsilons):
        params = ctx.region_params(eps)
        report.maximum_factor.append(check_maximum_factor(
            ctx.critical, params, cfg.samples, RealizationStream(seed, CHECK_STREAMS + 2 * i), ctx.sampling
        ))
        report.no_large_jump.append(check_no_large_jump(
            ctx.critical, params, cfg.samples, RealizationStream(seed, CHECK_STREAMS + 2 * i + 1), ctx.sampling
        ))

    report.oscillation = oscillation_check(
        ctx.sampling, ctx.critical, cfg.oscillation_triples, cfg.oscillation_max_sites, seed
    )
    sweep = [
        random_critical_ensemble(RealizationStream(seed, SWEEP_STREAMS + i).generator)
        for i in range(cfg.sweep_ensembles)
    ]
    report.cone_condition = cone_condition_sweep(sweep)

    for j, (zeta, length) in enumerate(zip(cfg.zetas, cfg.ld_lengths)):
        report.ld_bounds.append(ld_bound_check(
            ctx.sampling, ctx.critical, ctx.moments, ctx.k_rho, ctx.xi, zeta, length, cfg.samples, seed,
            rho=ctx.rho, stream_index=LD_STREAMS + j,
        ))

    run = rotation_realizations(
        ctx.sampling, ctx.critical, list(cfg.epsilons) + [0.0], cfg.n_polymers, cfg.reps, seed, cfg.workers,
        cfg.theta0,
    )
    deltas, _, _ = increments_from_run(run, critical_ids(ctx.critical_ensemble, ctx.critical), ctx.critical.mean_length)
    for c, eps in enumerate(cfg.epsilons):
        stats = renewal_stats(
            [loops[c] for loops in run.loops], run.steps, epsilon=eps, k=ctx.k_rho, direction=run.direction(c)
        )
        report.mean_interarrival.append(mean_interarrival_check(stats, ctx.moments, ctx.critical, ctx.k_rho, ctx.xi, ctx.rho))
        report.rotation_bounds.append(rotation_bound_report(
            ctx.moments, ctx.critical, ctx.k_rho, ctx.xi, abs(eps), measured=float(deltas[c]), rho=ctx.rho,
        ))

    if report.passed:
        logger.info("verify: all suites passed")
    else:
        logger.warning("verify: failures in %s", ", ".join(report.failures))
    return report
