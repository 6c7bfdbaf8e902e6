"""Error codes shared by every stage of the library and the CLI."""
from __future__ import annotations

import enum
from typing import Any, Dict, Optional


class ErrorCode(str, enum.Enum):
    DIMENSION_TOO_LARGE = "DIMENSION_TOO_LARGE"
    INVALID_SAMPLES = "INVALID_SAMPLES"
    DEGREE_EXCEEDED = "DEGREE_EXCEEDED"
    NEGATIVE_TIME = "NEGATIVE_TIME"
    NON_FINITE_INPUT = "NON_FINITE_INPUT"
    ZERO_VARIANCE = "ZERO_VARIANCE"
    PRECONDITION_VIOLATED = "PRECONDITION_VIOLATED"
    NOT_SIMPLEX_VALUED = "NOT_SIMPLEX_VALUED"
    NON_ORTHONORMAL_BASIS = "NON_ORTHONORMAL_BASIS"
    BUDGET_EXCEEDED = "BUDGET_EXCEEDED"
    OUT_OF_BOX = "OUT_OF_BOX"
    DEGREE_BLOWUP = "DEGREE_BLOWUP"
    REPORT_VIOLATION = "REPORT_VIOLATION"
    INVALID_RHO = "INVALID_RHO"
    INVALID_INPUT = "INVALID_INPUT"
    NONMONOTONE = "NONMONOTONE"
    DEGENERATE_MARGINAL = "DEGENERATE_MARGINAL"
    DIM_MISMATCH = "DIM_MISMATCH"
    UNKNOWN_FAMILY = "UNKNOWN_FAMILY"
    INVALID_CONFIG = "INVALID_CONFIG"


class NisimError(ValueError):
    """Domain failure carrying a machine-readable code.

    ``detail`` holds measured quantities (exceedance rates, Gram deviations,
    the offending report) so callers can print them without re-running.
    """

    def __init__(self, code: ErrorCode, message: str, detail: Optional[Dict[str, Any]] = None):
        super().__init__(f"{code.value}: {message}")
        self.code = code
        self.message = message
        self.detail = detail or {}

    def to_dict(self) -> Dict[str, Any]:
        return {"error": self.code.value, "message": self.message, "detail": self.detail}
