"""Command service: one static method per CLI command."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from ...extensions import function_from_json
from ..boosting import DENSE_NODES, boost_match, trace_csv
from ..correlation import JointTable, estimate_table, tv_distance
from ..errors import ErrorCode, NisimError
from ..feasibility import BinaryTarget, FiniteJoint, VerdictStatus, decide_k2, max_correlation
from ..functions import VectorFunction
from ..sampling import MonteCarlo, Quadrature, make_estimator
from ..schemas import EstimationMethod, FunctionRef, MaxCorrOutput, OutputFormat, RunConfig, SmoothOutput, TableOutput
from ..smoothing import smooth
from ..spectral import expand
from ..utils.config import settings
from ..utils.jsonio import dumps, read_json, write_json
from ..utils.rng import STREAM_BOOST, STREAM_EXPAND

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2
EXIT_NEGATIVE = 3


@dataclass
class CommandOutcome:
    """What a command printed and how the process should exit."""
    stdout: str
    exit_code: int = EXIT_OK


class CommandService:
    """Service wrapping the library calls behind each subcommand."""

    @staticmethod
    def load_function(ref: FunctionRef) -> VectorFunction:
        """Load a function from a JSON file path or an inline object."""
        if isinstance(ref, dict):
            return function_from_json(ref, {"base_dir": Path.cwd()})
        path = Path(ref)
        try:
            data = read_json(path)
        except FileNotFoundError as e:
            raise NisimError(ErrorCode.INVALID_CONFIG, f"Function file not found: {path}") from e
        except ValueError as e:
            raise NisimError(ErrorCode.INVALID_CONFIG, f"Function file {path} is not valid JSON: {e}") from e
        return function_from_json(data, {"base_dir": path.parent})

    @staticmethod
    def _emit(config: RunConfig, payload: Any, exit_code: int = EXIT_OK) -> CommandOutcome:
        if config.output:
            write_json(config.output, payload)
            logger.info(f"{config.command.value}: wrote {config.output}")
            return CommandOutcome("", exit_code)
        return CommandOutcome(dumps(payload), exit_code)

    @staticmethod
    def _method(config: RunConfig, stream: int):
        if config.method is EstimationMethod.MONTE_CARLO:
            return MonteCarlo(config.samples or settings.MC_SAMPLES, config.seed, stream)
        return Quadrature(config.nodes)

    @staticmethod
    def expand(config: RunConfig) -> CommandOutcome:
        f = CommandService.load_function(config.f)
        expansion = expand(f, config.degree, CommandService._method(config, STREAM_EXPAND))
        return CommandService._emit(config, expansion.to_json())

    @staticmethod
    def boost(config: RunConfig) -> CommandOutcome:
        f = CommandService.load_function(config.f)
        d = config.degree
        method = CommandService._method(config, STREAM_BOOST)
        if isinstance(method, Quadrature) and method.nodes is None:
            # dense grids keep discontinuous targets accurate in low dimension
            method = Quadrature(max(2 * d + 4, DENSE_NODES.get(f.n, 0)))
        match = boost_match(f, d, config.delta, make_estimator(method, f.n, d))

        payload = {
            "degree": d,
            "delta": config.delta,
            "mismatch": match.mismatch,
            "literal_mismatch": match.literal_mismatch,
            **match.boost.to_json(),
        }
        if config.output:
            trace_path = Path(config.output).with_suffix(".trace.csv")
            trace_path.parent.mkdir(parents=True, exist_ok=True)
            trace_csv(match.boost.trace, trace_path)
            logger.info(f"boost: wrote trace {trace_path}")
        return CommandService._emit(config, payload)

    @staticmethod
    def smooth(config: RunConfig) -> CommandOutcome:
        f = CommandService.load_function(config.f)
        g = CommandService.load_function(config.g)
        result = smooth(
            f, g, config.resolved_t, config.delta, config.seed,
            samples=config.samples, strict=False, radius_mode=config.radius_mode,
            cap=config.cap, threads=config.threads,
        )

        out_dir = Path(config.output or ".")
        out_dir.mkdir(parents=True, exist_ok=True)
        written = {}
        for name, mixture in (("f1", result.f1), ("g1", result.g1)):
            data = mixture.to_json()
            data["maps"] = {key: mp.to_json(out_dir) for key, mp in mixture.maps.items()}
            written[name] = str(write_json(out_dir / f"{name}.json", data))
        write_json(out_dir / "report.json", result.report)

        summary = SmoothOutput(f1=written["f1"], g1=written["g1"],
                               report=result.report.model_dump(), passed=result.report.passed)
        if not result.report.passed and config.strict:
            raise NisimError(ErrorCode.REPORT_VIOLATION,
                             f"Items out of bounds: {', '.join(result.report.violations)}",
                             {"report": result.report.model_dump(), "output": str(out_dir)})
        return CommandOutcome(dumps(summary))

    @staticmethod
    def decide_k2(config: RunConfig) -> CommandOutcome:
        target = BinaryTarget(mu1=config.mu1, mu2=config.mu2, eta=config.eta)
        verdict = decide_k2(config.resolved_rho, target, config.tolerance)
        code = EXIT_NEGATIVE if verdict.status is VerdictStatus.INFEASIBLE else EXIT_OK
        return CommandService._emit(config, verdict, code)

    @staticmethod
    def maxcorr(config: RunConfig) -> CommandOutcome:
        data = read_json(config.input)
        joint = FiniteJoint(mass=data) if isinstance(data, list) else FiniteJoint.model_validate(data)
        result = max_correlation(joint)
        if config.output:
            write_json(config.output, MaxCorrOutput(rho=result.rho, degenerate=result.degenerate))
        return CommandOutcome(dumps(result.rho))

    @staticmethod
    def table(config: RunConfig) -> CommandOutcome:
        f = CommandService.load_function(config.f)
        g = CommandService.load_function(config.g)
        rho = config.resolved_rho
        table = estimate_table(f, g, rho, config.samples, config.seed, threads=config.threads)

        tv = None
        if config.compare == "product":
            tv = tv_distance(table, np.outer(table.row_sums(), table.col_sums()))
        elif config.compare:
            tv = tv_distance(table, JointTable.from_json(read_json(config.compare)))
        if tv is not None:
            logger.info(f"table: TV to {config.compare} = {tv:.6g} (aggregate SE {table.aggregate_stderr:.3g})")

        if config.format is OutputFormat.CSV:
            text = table.to_csv(config.output)
            return CommandOutcome("" if config.output else text)
        payload = TableOutput(
            k=table.k, samples=table.samples, rho=rho, seed=config.seed,
            entries=table.entries.tolist(), stderr=table.stderr.tolist(),
            aggregate_stderr=table.aggregate_stderr, compare=config.compare, tv=tv,
        )
        return CommandService._emit(config, payload)

    @staticmethod
    def run(config: RunConfig) -> CommandOutcome:
        handler = {
            "expand": CommandService.expand,
            "boost": CommandService.boost,
            "smooth": CommandService.smooth,
            "decide-k2": CommandService.decide_k2,
            "maxcorr": CommandService.maxcorr,
            "table": CommandService.table,
        }[config.command.value]
        return handler(config)
