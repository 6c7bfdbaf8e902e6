"""Evaluable maps R^n -> R^k with a declared structural form."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .errors import ErrorCode, NisimError

logger = logging.getLogger(__name__)

Evaluator = Callable[[np.ndarray], np.ndarray]


class FunctionForm(str, enum.Enum):
    BLACKBOX = "blackbox"
    TRUNCATED_SERIES = "truncated_series"
    PROJECTED_POLY = "projected_poly"
    PPF_MIXTURE = "ppf_mixture"
    FACTORED_POLY = "factored_poly"


class RangeRegion(str, enum.Enum):
    ANY = "any"
    SIMPLEX = "simplex"
    VERTEX = "vertex"
    UNIT_ORTHANT = "unit_orthant"


@dataclass(frozen=True)
class VectorFunction:
    """Deterministic map R^n -> R^k.

    ``payload`` keeps the structured object behind non-blackbox forms
    (the expansion, the boosting result, the mixture) so callers can
    serialize or inspect it.
    """
    n: int
    k: int
    evaluator: Evaluator = field(repr=False)
    form: FunctionForm = FunctionForm.BLACKBOX
    region: RangeRegion = RangeRegion.ANY
    payload: Any = field(default=None, repr=False)
    name: str = ""

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.shape[1] != self.n:
            raise NisimError(ErrorCode.DIM_MISMATCH, f"Expected inputs of dimension {self.n}, got {x2.shape[1]}")
        out = np.asarray(self.evaluator(x2), dtype=float).reshape(x2.shape[0], self.k)
        return out[0] if single else out



def constant_function(n: int, value: np.ndarray, name: str = "constant") -> VectorFunction:
    value = np.asarray(value, dtype=float)
    k = value.shape[0]
    if np.all(value >= 0) and abs(value.sum() - 1.0) <= 1e-12:
        region = RangeRegion.VERTEX if np.count_nonzero(value) == 1 else RangeRegion.SIMPLEX
    else:
        region = RangeRegion.ANY
    return VectorFunction(
        n, k, lambda x: np.broadcast_to(value, (x.shape[0], k)).copy(),
        FunctionForm.BLACKBOX, region, None, name,
    )


def labels_to_vertices(labels: np.ndarray, k: int) -> np.ndarray:
    """Vertex embedding of [k]-valued labels (0-based) into Delta_k."""
    labels = np.asarray(labels, dtype=int)
    out = np.zeros((labels.shape[0], k))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def vertex_function(n: int, k: int, labeler: Callable[[np.ndarray], np.ndarray], name: str = "") -> VectorFunction:
    """Vertex-embedded [k]-valued function from a label map R^n -> {0..k-1}."""
    return VectorFunction(
        n, k, lambda x: labels_to_vertices(labeler(x), k),
        FunctionForm.BLACKBOX, RangeRegion.VERTEX, None, name,
    )


def in_simplex(values: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Row-wise membership in Delta_k up to ``tol``."""
    values = np.atleast_2d(values)
    return np.all(values >= -tol, axis=1) & (np.abs(values.sum(axis=1) - 1.0) <= tol)


def check_simplex_valued(f: VectorFunction, x: np.ndarray, tol: float = 1e-9) -> None:
    """Sampled range check; raises NOT_SIMPLEX_VALUED on the first failing point."""
    ok = in_simplex(f(x), tol)
    if not np.all(ok):
        bad = int(np.argmin(ok))
        raise NisimError(
            ErrorCode.NOT_SIMPLEX_VALUED,
            f"Function {f.name or f.form.value} leaves the simplex on sampled inputs",
            {"fraction_outside": float(1.0 - ok.mean()), "first_point": x[bad].tolist()},
        )
