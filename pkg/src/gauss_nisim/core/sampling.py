"""
Gaussian samplers and the expectation estimators shared by every stage.

Two estimators exist: tensorized Gauss-Hermite quadrature (n <= 6) and plain
Monte Carlo on a fixed sample. Both expose the same node/weight interface so
stages that compare two expectations (boosting, drift reports) can reuse one
set of nodes and get coherent differences.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from pydantic import BaseModel, ConfigDict, Field

from .errors import ErrorCode, NisimError
from .utils.config import settings
from .utils.rng import STREAM_PAIRS, stream_generator

logger = logging.getLogger(__name__)

MAX_QUADRATURE_DIM = 6


# -----------------------------------------------------------------------------
# Correlated pairs
# -----------------------------------------------------------------------------

class GaussianPairSampler(BaseModel):
    """Source of rho-correlated standard Gaussian vectors (X, Y) in R^n."""
    model_config = ConfigDict(frozen=True)

    rho: float = Field(ge=-1.0, le=1.0)
    dim: int = Field(ge=1)
    seed: int = Field(ge=0, lt=2**64)

    @classmethod
    def from_time(cls, t: float, dim: int, seed: int) -> "GaussianPairSampler":
        if t < 0:
            raise NisimError(ErrorCode.NEGATIVE_TIME, f"Noise time must be >= 0, got {t}")
        return cls(rho=math.exp(-t), dim=dim, seed=seed)


def correlate(x: np.ndarray, z: np.ndarray, rho: float) -> np.ndarray:
    """Y = rho X + sqrt(1 - rho^2) Z."""
    if abs(rho) == 1.0:
        return rho * x
    return rho * x + math.sqrt(1.0 - rho * rho) * z


def sample_pairs(sampler: GaussianPairSampler, count: int, stream: int = STREAM_PAIRS) -> Tuple[np.ndarray, np.ndarray]:
    """``count`` i.i.d. pairs, each of shape (count, dim)."""
    if count < 1:
        raise NisimError(ErrorCode.INVALID_SAMPLES, f"Pair count must be >= 1, got {count}")
    rng = stream_generator(sampler.seed, stream)
    x = rng.standard_normal((count, sampler.dim))
    z = rng.standard_normal((count, sampler.dim))
    return x, correlate(x, z, sampler.rho)


def batch_sizes(count: int, batches: int) -> list:
    batches = max(1, min(batches, count))
    base, extra = divmod(count, batches)
    return [base + (1 if b < extra else 0) for b in range(batches)]


# -----------------------------------------------------------------------------
# Estimation methods
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class Quadrature:
    """Tensorized Gauss-Hermite; ``nodes`` per axis defaults to 2d+4."""
    nodes: Optional[int] = None


@dataclass(frozen=True)
class MonteCarlo:
    samples: int
    seed: int
    stream: int = 0


Method = Union[Quadrature, MonteCarlo]


class Estimator:
    """Expectations under gamma_n as weighted sums over fixed nodes."""

    kind = "base"

    def __init__(self, n: int, nodes: np.ndarray, weights: np.ndarray):
        self.n = n
        self.nodes = nodes
        self.weights = weights

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def expect(self, values: np.ndarray) -> np.ndarray:
        """E[values] along the node axis."""
        return np.tensordot(self.weights, values, axes=(0, 0))

    def stderr(self, values: np.ndarray) -> np.ndarray:
        return np.zeros(np.shape(values)[1:])

    def expect_products(self, A: np.ndarray, C: np.ndarray) -> np.ndarray:
        """Matrix of E[A_i C_j] for column blocks A (M, p) and C (M, q)."""
        return (A * self.weights[:, None]).T @ C

    def stderr_products(self, A: np.ndarray, C: np.ndarray) -> np.ndarray:
        return np.zeros((A.shape[1], C.shape[1]))


class QuadratureEstimator(Estimator):
    kind = "quadrature"

    def __init__(self, n: int, nodes_per_axis: int):
        if n > MAX_QUADRATURE_DIM:
            raise NisimError(
                ErrorCode.DIMENSION_TOO_LARGE,
                f"Quadrature supports n <= {MAX_QUADRATURE_DIM}, got n={n}; use Monte Carlo",
            )
        x1, w1 = hermegauss(nodes_per_axis)
        w1 = w1 / math.sqrt(2.0 * math.pi)
        grid = np.array(list(itertools.product(x1, repeat=n)), dtype=float).reshape(-1, n)
        weights = np.array([np.prod(w) for w in itertools.product(w1, repeat=n)], dtype=float)
        super().__init__(n, grid, weights)
        self.nodes_per_axis = nodes_per_axis
        logger.debug(f"Quadrature grid: n={n}, {nodes_per_axis} nodes/axis, {grid.shape[0]} points")


class MonteCarloEstimator(Estimator):
    kind = "monte_carlo"

    def __init__(self, n: int, samples: int, seed: int, stream: int = 0):
        if samples < 2:
            raise NisimError(ErrorCode.INVALID_SAMPLES, f"Monte Carlo needs N >= 2, got {samples}")
        rng = stream_generator(seed, stream)
        nodes = rng.standard_normal((samples, n))
        super().__init__(n, nodes, np.full(samples, 1.0 / samples))
        self.seed = seed
        self.stream = stream

    def stderr(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return values.std(axis=0, ddof=1) / math.sqrt(values.shape[0])

    def stderr_products(self, A: np.ndarray, C: np.ndarray) -> np.ndarray:
        M = A.shape[0]
        mean = self.expect_products(A, C)
        second = self.expect_products(A * A, C * C)
        var = np.clip(second - mean * mean, 0.0, None) * M / (M - 1)
        return np.sqrt(var / M)


def make_estimator(method: Method, n: int, d: int = 0) -> Estimator:
    if isinstance(method, Quadrature):
        per_axis = method.nodes or settings.QUADRATURE_NODES or (2 * d + 4)
        return QuadratureEstimator(n, per_axis)
    if isinstance(method, MonteCarlo):
        return MonteCarloEstimator(n, method.samples, method.seed, method.stream)
    raise TypeError(f"Unsupported estimation method: {method!r}")


