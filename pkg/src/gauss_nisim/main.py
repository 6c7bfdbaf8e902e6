"""Command-line entry point for gauss-nisim."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from .core.errors import ErrorCode, NisimError
from .core.registry import registry
from .core.schemas import EstimationMethod, RunConfig, RunHeader
from .core.services.command_service import (
    EXIT_ERROR,
    EXIT_NEGATIVE,
    EXIT_VALIDATION,
    CommandService,
)
from .core.utils.config import settings
from .core.utils.jsonio import dumps, read_json
from .core.utils.rng import stream_layout
from .extensions import ensure_loaded

logger = logging.getLogger(__name__)

# Codes that mean the request itself was malformed
VALIDATION_CODES = {
    ErrorCode.INVALID_INPUT,
    ErrorCode.INVALID_CONFIG,
    ErrorCode.INVALID_RHO,
    ErrorCode.INVALID_SAMPLES,
    ErrorCode.NEGATIVE_TIME,
    ErrorCode.NON_FINITE_INPUT,
    ErrorCode.DIM_MISMATCH,
    ErrorCode.DIMENSION_TOO_LARGE,
    ErrorCode.DEGREE_EXCEEDED,
    ErrorCode.UNKNOWN_FAMILY,
}
NEGATIVE_CODES = {ErrorCode.REPORT_VIOLATION}


class UsageError(Exception):
    pass


class JsonArgumentParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors surface as UsageError instead of exiting."""

    def error(self, message: str):
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with run settings; flags override it")
    p.add_argument("--output", "-o", help="Output path (directory for smooth)")
    p.add_argument("--threads", type=int, help="Worker threads (default: GAUSS_NISIM_THREADS, then CPU count)")
    p.add_argument("--seed", type=int, help="Master seed; required for stochastic runs")


def _add_correlation(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rho", type=float, help="Source correlation")
    p.add_argument("--t", type=float, help="Noise time, rho = e^{-t}")


def _add_estimation(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=[m.value for m in EstimationMethod])
    p.add_argument("--nodes", type=int, help="Gauss-Hermite nodes per axis")
    p.add_argument("--samples", "-N", type=int, help="Monte Carlo sample count")


def create_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one subparser per command."""
    parser = JsonArgumentParser(prog="gauss-nisim", description="Non-interactive simulation over Gaussian sources")
    parser.add_argument("--log-level", default=None, help="Logging level (default: NISIM_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", parser_class=JsonArgumentParser)

    p = sub.add_parser("expand", help="Hermite expansion up to a degree")
    _add_common(p)
    _add_estimation(p)
    p.add_argument("--f", help="Function JSON file")
    p.add_argument("--degree", "-d", type=int)

    p = sub.add_parser("boost", help="Spectrum-matching projection iteration")
    _add_common(p)
    _add_estimation(p)
    p.add_argument("--f", help="Function JSON file")
    p.add_argument("--degree", "-d", type=int)
    p.add_argument("--delta", type=float)

    p = sub.add_parser("smooth", help="Smooth f and g into PPF mixtures")
    _add_common(p)
    _add_correlation(p)
    p.add_argument("--f", help="Function JSON file")
    p.add_argument("--g", help="Function JSON file")
    p.add_argument("--delta", type=float)
    p.add_argument("--samples", "-N", type=int)
    p.add_argument("--radius-mode", dest="radius_mode", choices=["empirical", "measured", "worst_case"])
    p.add_argument("--cap", type=int, help="Max grid values of one Bernstein evaluation")
    p.add_argument("--no-strict", dest="strict", action="store_const", const=False,
                   help="Write the report and exit 0 even when items are out of bounds")

    p = sub.add_parser("decide-k2", help="Feasibility of a binary target")
    _add_common(p)
    _add_correlation(p)
    p.add_argument("--mu1", type=float)
    p.add_argument("--mu2", type=float)
    p.add_argument("--eta", type=float, help="Target agreement probability Pr[U = V]")
    p.add_argument("--tolerance", type=float)

    p = sub.add_parser("maxcorr", help="Maximal correlation of a finite joint distribution")
    _add_common(p)
    p.add_argument("input", nargs="?", help="JSON file with the joint mass matrix")

    p = sub.add_parser("table", help="Correlation table of f and g")
    _add_common(p)
    _add_correlation(p)
    p.add_argument("--f", help="Function JSON file")
    p.add_argument("--g", help="Function JSON file")
    p.add_argument("--samples", "-N", type=int)
    p.add_argument("--format", choices=["json", "csv"])
    p.add_argument("--compare", help="'product' or a table JSON file; reports the TV distance")
    return parser


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge the optional config file with flags (flags win) and validate."""
    values: Dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            data = read_json(args.config)
        except (OSError, ValueError) as e:
            raise NisimError(ErrorCode.INVALID_CONFIG, f"Cannot read config file {args.config}: {e}") from e
        if not isinstance(data, dict):
            raise NisimError(ErrorCode.INVALID_CONFIG, "Config file must hold a JSON object")
        values.update(data)
    for key, value in vars(args).items():
        if key in ("config", "log_level") or value is None:
            continue
        values[key] = value
    values["command"] = args.command
    return RunConfig.model_validate(values)


def _fail(payload: Dict[str, Any], code: int) -> int:
    print(dumps(payload, indent=0), end="", file=sys.stderr)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a command is required: expand, boost, smooth, decide-k2, maxcorr, table")
    except UsageError as e:
        return _fail({"error": "USAGE", "message": str(e), "detail": {}}, EXIT_VALIDATION)

    logging.basicConfig(
        level=(args.log_level or settings.LOG_LEVEL).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    ensure_loaded()

    try:
        config = build_config(args)
        if config.is_stochastic:
            header = RunHeader(command=config.command.value, seed=config.seed,
                               streams=stream_layout(), threads=settings.resolved_threads(config.threads),
                               families={fam.name: fam.version for fam in registry.list_families()},
                               registry_digest=registry.digest())
            print(dumps(header, indent=0), end="", file=sys.stderr)
        outcome = CommandService.run(config)
    except ValidationError as e:
        detail = {"errors": json.loads(e.json(include_url=False))}
        return _fail({"error": ErrorCode.INVALID_CONFIG.value, "message": "Invalid run configuration",
                      "detail": detail}, EXIT_VALIDATION)
    except NisimError as e:
        if e.code in NEGATIVE_CODES:
            logger.error(e.message)
            return _fail(e.to_dict(), EXIT_NEGATIVE)
        if e.code in VALIDATION_CODES:
            return _fail(e.to_dict(), EXIT_VALIDATION)
        logger.error(f"{e.code.value}: {e.message}")
        return _fail(e.to_dict(), EXIT_ERROR)
    except FileNotFoundError as e:
        return _fail({"error": ErrorCode.INVALID_CONFIG.value, "message": str(e), "detail": {}}, EXIT_VALIDATION)

    if outcome.stdout:
        sys.stdout.write(outcome.stdout)
    return outcome.exit_code


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
