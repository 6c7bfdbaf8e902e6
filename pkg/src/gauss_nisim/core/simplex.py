"""
Simplex geometry and rounding.

Operations:
1) proj_simplex      - Euclidean projection onto Delta_k (sort-and-threshold)
2) argmax_vec        - e_i on a unique strict maximum, zero vector on ties
3) simplex_l1_distance - l1 distance to Delta_k (membership in Delta_{k,eps})
4) round_to_simplex  - Proj o f with the measured l1 rounding error
5) part_round        - [k]-valued rounding through Gaussian-mass partitions of an extra coordinate
6) grid_round        - threshold rounding with thresholds drawn from the eta-grid
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import ndtri

from .errors import ErrorCode, NisimError
from .functions import (
    FunctionForm,
    RangeRegion,
    VectorFunction,
    check_simplex_valued,
    labels_to_vertices,
)
from .hermite import HermiteExpansion
from .utils.config import settings
from .utils.rng import STREAM_CHECKS, STREAM_GRID_ROUND, stream_generator

logger = logging.getLogger(__name__)

# Rows already in Delta_k up to this tolerance are returned unchanged.
SIMPLEX_TOLERANCE = 1e-12


# -------------------------------------------------------------------
# Projection and argmax
# -------------------------------------------------------------------
def proj_simplex(x: np.ndarray) -> np.ndarray:
    """Euclidean projection of a vector (or each row of a matrix) onto Delta_k."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NisimError(ErrorCode.NON_FINITE_INPUT, "proj_simplex received non-finite coordinates")
    single = x.ndim == 1
    X = np.atleast_2d(x)
    k = X.shape[1]

    u = -np.sort(-X, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, k + 1)
    cond = u - css / ind > 0
    last = k - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(X.shape[0]), last] / (last + 1)
    out = np.maximum(X - theta[:, None], 0.0)

    inside = np.all(X >= 0, axis=1) & (np.abs(X.sum(axis=1) - 1.0) <= SIMPLEX_TOLERANCE)
    out[inside] = X[inside]
    return out[0] if single else out


def argmax_vec(z: np.ndarray) -> np.ndarray:
    """e_i when z_i is the unique strict maximum, the zero vector on any tie.

    Comparison is exact; ties are measure-zero for continuous inputs.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    Z = np.atleast_2d(z)
    top = Z.max(axis=1)
    unique = (Z == top[:, None]).sum(axis=1) == 1
    out = np.zeros_like(Z)
    rows = np.nonzero(unique)[0]
    out[rows, np.argmax(Z[rows], axis=1)] = 1.0
    return out[0] if single else out


def simplex_l1_distance(y: np.ndarray) -> np.ndarray:
    """l1 distance to Delta_k: negative mass plus |positive mass - 1|."""
    y = np.asarray(y, dtype=float)
    neg = np.clip(-y, 0.0, None).sum(axis=-1)
    pos = np.clip(y, 0.0, None).sum(axis=-1)
    return neg + np.abs(pos - 1.0)


# -------------------------------------------------------------------
# Rounding onto the simplex
# -------------------------------------------------------------------
@dataclass(frozen=True)
class RoundingResult:
    function: VectorFunction
    l1_error: float
    l1_stderr: float
    exceedance: float
    bound: float

    @property
    def within_bound(self) -> bool:
        return self.l1_error <= self.bound


def round_to_simplex(
    f: VectorFunction,
    delta: float,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
    multiplier: Optional[float] = None,
) -> RoundingResult:
    """Replace f by Proj o f.

    The precondition Pr[f not in Delta_{k,delta}] <= delta and ||f||_inf <= k is
    checked on a Gaussian sample; the returned result carries the measured
    E||f - Proj f||_1 against c*k*delta.
    """
    samples = samples or settings.MC_SAMPLES
    seed = settings.DEFAULT_SEED if seed is None else seed
    c = settings.REPORT_MULTIPLIER if multiplier is None else multiplier

    x = stream_generator(seed, STREAM_CHECKS).standard_normal((samples, f.n))
    values = f(x)
    outside = simplex_l1_distance(values) > delta + SIMPLEX_TOLERANCE
    exceedance = float(outside.mean())
    slack = 3.0 * math.sqrt(max(delta * (1.0 - delta), 0.0) / samples)
    sup = float(np.max(np.abs(values)))
    if exceedance > delta + slack or sup > f.k:
        raise NisimError(
            ErrorCode.PRECONDITION_VIOLATED,
            f"f leaves Delta_(k,{delta}) with probability {exceedance:.4g} (sup norm {sup:.4g})",
            {"exceedance": exceedance, "allowed": delta, "sup_norm": sup},
        )

    diff = np.abs(values - proj_simplex(values)).sum(axis=1)
    l1_error = float(diff.mean())
    l1_stderr = float(diff.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0

    if f.form is FunctionForm.TRUNCATED_SERIES and isinstance(f.payload, HermiteExpansion):
        from .boosting import ProjectedPolynomial

        rounded = ProjectedPolynomial(f.payload).as_function(f"Proj({f.name})")
    else:
        rounded = VectorFunction(f.n, f.k, lambda z: proj_simplex(f(z)), FunctionForm.BLACKBOX,
                                 RangeRegion.SIMPLEX, None, f"Proj({f.name})")
    logger.info(f"round_to_simplex: E||f-f1||_1={l1_error:.4g} (bound {c * f.k * delta:.4g})")
    return RoundingResult(rounded, l1_error, l1_stderr, exceedance, c * f.k * delta)


# -------------------------------------------------------------------
# Partition rounding
# -------------------------------------------------------------------
def part_index(y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Index of the interval containing z when R is cut into k pieces of Gaussian mass y_i."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    cum = np.clip(np.cumsum(y, axis=1)[:, :-1], 0.0, 1.0)
    boundaries = ndtri(cum)
    return (np.asarray(z, dtype=float)[:, None] >= boundaries).sum(axis=1)


def part_round(
    f1: VectorFunction,
    g1: VectorFunction,
    t: float,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> Tuple[VectorFunction, VectorFunction]:
    """[k]-valued functions on R^{n+2} with the same expectations and correlation table.

    f2 reads the partition coordinate z1 (index n) and g2 reads z2 (index n+1),
    so the extra coordinates seen by the two sides are independent.
    """
    if t < 0:
        raise NisimError(ErrorCode.NEGATIVE_TIME, f"Noise time must be >= 0, got {t}")
    if f1.n != g1.n or f1.k != g1.k:
        raise NisimError(ErrorCode.DIM_MISMATCH, "part_round needs functions with equal n and k")
    samples = samples or min(settings.MC_SAMPLES, 10_000)
    seed = settings.DEFAULT_SEED if seed is None else seed
    x = stream_generator(seed, STREAM_CHECKS + 1).standard_normal((samples, f1.n))
    for fn in (f1, g1):
        if fn.region not in (RangeRegion.SIMPLEX, RangeRegion.VERTEX):
            check_simplex_valued(fn, x)

    n, k = f1.n, f1.k

    def lift(fn: VectorFunction, coord: int, name: str) -> VectorFunction:
        def evaluate(xz: np.ndarray) -> np.ndarray:
            return labels_to_vertices(part_index(fn(xz[:, :n]), xz[:, coord]), k)
        return VectorFunction(n + 2, k, evaluate, FunctionForm.BLACKBOX, RangeRegion.VERTEX, None, name)

    return lift(f1, n, f"Part({f1.name})"), lift(g1, n + 1, f"Part({g1.name})")


# -------------------------------------------------------------------
# Grid rounding
# -------------------------------------------------------------------
class GridMode(str, enum.Enum):
    EXPECTED = "expected"
    SAMPLED = "sampled"


def eta_grid(eta: float) -> np.ndarray:
    """{i*eta : i >= 0} intersected with [0, 1], both endpoints included when hit."""
    if not 0 < eta <= 1:
        raise NisimError(ErrorCode.INVALID_INPUT, f"eta must lie in (0, 1], got {eta}")
    count = int(math.floor(1.0 / eta + 1e-9))
    return np.arange(count + 1) * eta


def grid_round(
    y: np.ndarray,
    eta: float,
    mode: GridMode = GridMode.EXPECTED,
    seed: Optional[int] = None,
) -> np.ndarray:
    """Round y coordinate-wise through thresholds alpha ~ Int_eta^k.

    Coordinate s survives iff alpha_s < y_s. EXPECTED returns the exact
    average over the grid; SAMPLED returns one draw.
    """
    grid = eta_grid(eta)
    y = np.asarray(y, dtype=float)
    if mode is GridMode.EXPECTED:
        return (grid[None, :] < y[..., None]).sum(axis=-1) / grid.size
    rng = stream_generator(settings.DEFAULT_SEED if seed is None else seed, STREAM_GRID_ROUND)
    alpha = grid[rng.integers(0, grid.size, size=y.shape)]
    return (alpha < y).astype(float)


def grid_round_bound(zeta: float, k: int, eta: float) -> float:
    return 2.0 * (zeta + k * eta)
