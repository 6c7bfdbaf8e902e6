"""Run configuration and CLI output schemas."""
import math
from enum import Enum
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .bernstein import RadiusMode


class Command(str, Enum):
    EXPAND = "expand"
    BOOST = "boost"
    SMOOTH = "smooth"
    DECIDE_K2 = "decide-k2"
    MAXCORR = "maxcorr"
    TABLE = "table"


class EstimationMethod(str, Enum):
    QUADRATURE = "quadrature"
    MONTE_CARLO = "monte_carlo"


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


# Commands that consume a correlation and commands that draw random numbers
CORRELATED_COMMANDS = {Command.SMOOTH, Command.DECIDE_K2, Command.TABLE}
SAMPLED_COMMANDS = {Command.SMOOTH, Command.TABLE}

# A function reference is either a path to a JSON file or the inline object
FunctionRef = Union[str, Dict[str, Any]]


class RunConfig(BaseModel):
    """One CLI invocation, merged from a config file and flags."""
    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    command: Command
    f: Optional[FunctionRef] = None
    g: Optional[FunctionRef] = None
    input: Optional[str] = None

    rho: Optional[float] = Field(default=None, ge=-1.0, le=1.0)
    t: Optional[float] = Field(default=None, ge=0.0)
    delta: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)
    samples: Optional[int] = Field(default=None, ge=2)

    degree: Optional[int] = Field(default=None, ge=0)
    method: EstimationMethod = EstimationMethod.QUADRATURE
    nodes: Optional[int] = Field(default=None, ge=1)

    mu1: Optional[float] = None
    mu2: Optional[float] = None
    eta: Optional[float] = None
    tolerance: Optional[float] = Field(default=None, ge=0.0)

    output: Optional[str] = None
    format: OutputFormat = OutputFormat.JSON
    compare: Optional[str] = None
    threads: Optional[int] = Field(default=None, ge=1)

    radius_mode: RadiusMode = RadiusMode.EMPIRICAL
    cap: Optional[int] = Field(default=None, ge=2)
    strict: bool = True

    @model_validator(mode="after")
    def _check_command(self) -> "RunConfig":
        if self.rho is not None and self.t is not None:
            raise ValueError("Supply exactly one of rho or t (e^{-t} = rho), not both")
        if self.command in CORRELATED_COMMANDS and self.rho is None and self.t is None:
            raise ValueError(f"{self.command.value} needs one of rho or t")
        if self.command is Command.SMOOTH and self.rho is not None and self.rho <= 0:
            raise ValueError("smooth needs rho in (0, 1] so that t = -ln(rho) is defined")
        if self.is_stochastic and self.seed is None:
            raise ValueError(f"{self.command.value} draws random samples; a seed is required")

        required = {
            Command.EXPAND: ("f", "degree"),
            Command.BOOST: ("f", "degree", "delta"),
            Command.SMOOTH: ("f", "g", "delta"),
            Command.DECIDE_K2: ("mu1", "mu2", "eta"),
            Command.MAXCORR: ("input",),
            Command.TABLE: ("f", "g", "samples"),
        }[self.command]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.command.value} needs: {', '.join(missing)}")
        return self

    @property
    def is_stochastic(self) -> bool:
        if self.command in SAMPLED_COMMANDS:
            return True
        return self.command in {Command.EXPAND, Command.BOOST} and self.method is EstimationMethod.MONTE_CARLO

    @property
    def resolved_rho(self) -> float:
        return self.rho if self.rho is not None else math.exp(-self.t)

    @property
    def resolved_t(self) -> float:
        if self.t is not None:
            return self.t
        return math.inf if self.rho == 0 else -math.log(self.rho)


class RunHeader(BaseModel):
    """Printed before every randomized command so the run can be replayed."""
    command: str
    seed: Optional[int] = None
    streams: Dict[str, int] = Field(default_factory=dict)
    threads: int
    families: Dict[str, Optional[str]] = Field(default_factory=dict)
    registry_digest: str = ""


class TableOutput(BaseModel):
    k: int
    samples: int
    rho: float
    seed: int
    entries: List[List[float]]
    stderr: List[List[float]]
    aggregate_stderr: float
    compare: Optional[str] = None
    tv: Optional[float] = None


class SmoothOutput(BaseModel):
    f1: str
    g1: str
    report: Dict[str, Any]
    passed: bool


class MaxCorrOutput(BaseModel):
    rho: float
    degenerate: bool
