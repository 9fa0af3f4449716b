"""
`pseudogap-lab` command line.

    pseudogap-lab <command> [dump] --config cfg.json --seed S --workers W --out DIR

Exit codes: 0 success, 2 configuration or domain error, 3 under-resolved
fit, 4 invariant violation or consistency failure, 5 unsupported case.
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from app.config import configure_logging, settings
from app.engine import commands
from app.errors import ConfigurationError, InvariantViolation, PseudogapError
from app.models.run import CommandName, RunConfig
from app.utils.result_storage import ResultStorageService

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pseudogap-lab",
        description="Random polymer Jacobi operators near a hyperbolic critical energy.",
    )
    parser.add_argument("command", choices=[c.value for c in CommandName])
    parser.add_argument("dump", nargs="?", choices=["dump"], help="accepted after criticaldata and trajectory")
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None, help="overrides the seed in the config")
    parser.add_argument("--workers", type=int, default=None, help="worker processes (default: config or DEFAULT_WORKERS)")
    parser.add_argument("--out", default=None, help="output directory (default: config or OUTPUT_DIR)")
    parser.add_argument("--log-level", default=None, help=f"logging level (default: {settings.LOG_LEVEL})")
    return parser


def load_config(path: str, seed: Optional[int] = None, workers: Optional[int] = None, out: Optional[str] = None) -> RunConfig:
    """Read the JSON file, apply CLI overrides and validate."""
    try:
        with open(path) as handle:
            payload = json.load(handle)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise ConfigurationError(f"{path}: expected a JSON object")
    for key, value in (("seed", seed), ("workers", workers), ("out", out)):
        if value is not None:
            payload[key] = value
    try:
        return RunConfig.model_validate(payload)
    except ValidationError as exc:
        fields = ["/".join(str(p) for p in err["loc"]) + f": {err['msg']}" for err in exc.errors()]
        raise ConfigurationError(f"{path}: invalid configuration; " + "; ".join(fields), fields=fields) from exc


def execute(command: CommandName, config: RunConfig, config_payload: dict) -> List[str]:
    """Run one command and write its outputs; returns the written file names."""
    ctx = commands.RunContext(config, command)
    storage = ResultStorageService(config.out)
    meta = storage.metadata_lines(command.value, config.seed, config.workers, config_payload)
    written = []

    def csv(name, columns, rows):
        storage.write_csv(name, columns, rows, meta)
        written.append(name)

    def json_out(name, payload):
        storage.write_json(name, payload)
        written.append(name)

    if command == CommandName.SPECTRUM:
        spectra, hist = commands.run_spectrum(ctx)
        csv("spectrum.csv", ["realization", "eigenvalue"],
            ((r, e) for r, eigs in enumerate(spectra) for e in eigs))
        csv("histogram.csv", ["left", "right", "center", "count"],
            zip(hist.edges[:-1], hist.edges[1:], hist.centers, hist.counts))
    elif command == CommandName.IDS:
        curve = commands.run_ids(ctx)
        csv("ids.csv", ["E", "N_E", "stderr"], zip(curve.energies, curve.values, curve.stderr))
    elif command == CommandName.ROTATION:
        rows = commands.run_rotation(ctx)
        columns = ["epsilon", "energy", "ids", "stderr", "loops", "winding", "steps"]
        csv("rotation.csv", columns, ([row[c] for c in columns] for row in rows))
    elif command == CommandName.NU:
        json_out("nu.json", commands.run_nu(ctx))
    elif command == CommandName.LYAPUNOV:
        points, thouless = commands.run_lyapunov(ctx)
        csv("lyapunov.csv", ["E", "gamma", "stderr"], ((p.energy, p.gamma, p.stderr) for p in points))
        if thouless is not None:
            json_out("thouless.json", thouless)
    elif command == CommandName.RENEWAL:
        rows = commands.run_renewal(ctx)
        columns = ["epsilon", "loops", "winding", "steps", "mean", "rate", "half_width", "rotation_rate",
                   "interarrival_mean", "censored", "lower_bound"]
        csv("renewal.csv", columns, ([row[c] for c in columns] for row in rows))
    elif command == CommandName.HOLDER:
        fit, rows = commands.run_holder(ctx)
        columns = ["epsilon", "ids_delta", "stderr", "log_eps", "log_delta"]
        csv("holder.csv", columns, ([row[c] for c in columns] for row in rows))
        json_out("fit.json", fit)
    elif command == CommandName.VERIFY:
        report = commands.run_verify(ctx)
        json_out("verify.json", report)
        if not report.passed:
            raise InvariantViolation("verify found violations", failures=report.failures)
    elif command == CommandName.CRITICALDATA:
        json_out("criticaldata.json", commands.run_criticaldata(ctx))
    elif command == CommandName.TRAJECTORY:
        rows = commands.run_trajectory(ctx)
        columns = ["step", "theta_lift", "theta_mod_pi", "log_R", "x", "region", "winding"]
        csv("trajectory.csv", columns, ([row[c] for c in columns] for row in rows))
    return written


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    command = CommandName(args.command)
    if args.dump and command not in (CommandName.CRITICALDATA, CommandName.TRAJECTORY):
        logger.error("'dump' only applies to criticaldata and trajectory")
        return ConfigurationError.exit_code
    try:
        config = load_config(args.config, args.seed, args.workers, args.out)
        payload = config.model_dump(mode="json", exclude={"out", "workers"})
        logger.info("%s: seed=%s workers=%d out=%s", command.value, config.seed, config.workers, config.out)
        written = execute(command, config, payload)
    except PseudogapError as exc:
        logger.error("%s: %s %s", type(exc).__name__, exc.message, exc.details or "")
        return exc.exit_code
    logger.info("%s finished: %s", command.value, ", ".join(written))
    return 0


if __name__ == "__main__":
    sys.exit(main())
