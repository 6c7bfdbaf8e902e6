"""Binary-target feasibility over the rho-correlated Gaussian source and the
maximal correlation of finite joint distributions."""
from __future__ import annotations

import enum
import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import integrate, linalg
from scipy.special import ndtr, ndtri

from .errors import ErrorCode, NisimError
from .utils.config import settings

logger = logging.getLogger(__name__)

MONOTONE_GRID = 33
BISECTION_STEPS = 200
SNAP_TOLERANCE = 1e-12


# -----------------------------------------------------------------------------
# Schemas
# -----------------------------------------------------------------------------

class BinaryTarget(BaseModel):
    """Target law of a pair of bits: means and agreement probability Pr[U = V]."""
    model_config = ConfigDict(frozen=True)

    mu1: float = Field(ge=0.0, le=1.0)
    mu2: float = Field(ge=0.0, le=1.0)
    eta: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _coupling_exists(self) -> "BinaryTarget":
        lo = abs(1.0 - self.mu1 - self.mu2)
        hi = 1.0 - abs(self.mu1 - self.mu2)
        if not lo - 1e-12 <= self.eta <= hi + 1e-12:
            raise ValueError(f"No coupling with means ({self.mu1}, {self.mu2}) has agreement {self.eta}; "
                             f"allowed range is [{lo}, {hi}]")
        return self


class FiniteJoint(BaseModel):
    mass: List[List[float]]

    @field_validator("mass")
    @classmethod
    def _is_distribution(cls, v: List[List[float]]) -> List[List[float]]:
        arr = np.asarray(v, dtype=float)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("mass must be a non-empty rectangular matrix")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("mass entries must be finite and non-negative")
        if abs(arr.sum() - 1.0) > 1e-12:
            raise ValueError(f"mass must sum to 1, got {arr.sum()!r}")
        return v

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.mass, dtype=float)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.array.shape


class VerdictStatus(str, enum.Enum):
    FEASIBLE = "FEASIBLE"
    INFEASIBLE = "INFEASIBLE"


class Strategy(BaseModel):
    """f(x) = 1[x > kappa1] and g(y) = 1[a <= y <= b]."""
    kappa1: float
    a: float
    b: float
    agreement: float


class Verdict(BaseModel):
    status: VerdictStatus
    rho: float
    target: BinaryTarget
    corr_min: float
    corr_max: float
    tolerance: float
    strategy: Optional[Strategy] = None
    violated_bound: Optional[str] = None
    gap: Optional[float] = None


class MaxCorrelation(BaseModel):
    rho: float
    degenerate: bool = False
    singular_values: List[float] = Field(default_factory=list)


# -----------------------------------------------------------------------------
# Orthant probabilities
# -----------------------------------------------------------------------------

def _check_rho(rho: float) -> float:
    rho = float(rho)
    if not np.isfinite(rho) or abs(rho) > 1.0:
        raise NisimError(ErrorCode.INVALID_RHO, f"Correlation must lie in [-1, 1], got {rho}")
    return rho


def binorm_orthant(rho: float, kappa1: float, kappa2: float) -> float:
    """Pr[X > kappa1, Y > kappa2] for standard normals with correlation rho.

    Integrates phi(x) Phi((rho x - kappa2) / sqrt(1 - rho^2)) over x > kappa1,
    split where the inner argument changes sign.
    """
    rho = _check_rho(rho)
    k1, k2 = float(kappa1), float(kappa2)
    if k1 == -math.inf:
        return float(ndtr(-k2))
    if k2 == -math.inf:
        return float(ndtr(-k1))
    if k1 == math.inf or k2 == math.inf:
        return 0.0
    if rho == 1.0:
        return float(ndtr(-max(k1, k2)))
    if rho == -1.0:
        return float(max(0.0, ndtr(-k2) - ndtr(k1)))
    if rho == 0.0:
        return float(ndtr(-k1) * ndtr(-k2))

    s = math.sqrt((1.0 - rho) * (1.0 + rho))

    def integrand(x: float) -> float:
        return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi) * float(ndtr((rho * x - k2) / s))

    opts = dict(epsabs=1e-13, epsrel=1e-11, limit=400)
    split = k2 / rho
    if split > k1:
        total = integrate.quad(integrand, k1, split, **opts)[0] + integrate.quad(integrand, split, math.inf, **opts)[0]
    else:
        total = integrate.quad(integrand, k1, math.inf, **opts)[0]
    return float(min(1.0, max(0.0, total)))


def threshold_table(rho: float, kappa1: float, kappa2: float) -> np.ndarray:
    """Exact 2x2 table of (1[X > kappa1], 1[Y > kappa2]) with label 0 for 'above'."""
    both = binorm_orthant(rho, kappa1, kappa2)
    p1, p2 = float(ndtr(-kappa1)), float(ndtr(-kappa2))
    table = np.array([[both, p1 - both], [p2 - both, 1.0 - p1 - p2 + both]])
    return np.clip(table, 0.0, 1.0)


def _check_means(*mus: float) -> None:
    for mu in mus:
        if not 0.0 <= mu <= 1.0:
            raise NisimError(ErrorCode.INVALID_INPUT, f"Marginal means must lie in [0, 1], got {mu}")


def corr_bounds(rho: float, mu1: float, mu2: float) -> Tuple[float, float]:
    """(Corr_min, Corr_max): agreement of anti-aligned and aligned Gaussian thresholds."""
    if not np.isfinite(rho) or abs(rho) > 1.0:
        raise NisimError(ErrorCode.INVALID_INPUT, f"rho must lie in [-1, 1], got {rho}")
    _check_means(mu1, mu2)
    if rho < 0:
        logger.warning(f"corr_bounds: rho={rho} < 0 handled by negating one coordinate")
    k1, k2 = float(ndtri(1.0 - mu1)), float(ndtri(1.0 - mu2))
    base = 1.0 - mu1 - mu2
    aligned = base + 2.0 * binorm_orthant(rho, k1, k2)
    anti = base + 2.0 * binorm_orthant(-rho, k1, k2)
    lo, hi = sorted((anti, aligned))
    return float(np.clip(lo, 0.0, 1.0)), float(np.clip(hi, 0.0, 1.0))


def agreement(rho: float, kappa1: float, interval: Tuple[float, float]) -> float:
    """Pr[1[X > kappa1] = 1[a <= Y <= b]]."""
    a, b = interval
    mu1 = float(ndtr(-kappa1))
    mu2 = float(ndtr(b) - ndtr(a))
    inside = binorm_orthant(rho, kappa1, a) - binorm_orthant(rho, kappa1, b)
    return float(np.clip(1.0 - mu1 - mu2 + 2.0 * inside, 0.0, 1.0))


# -----------------------------------------------------------------------------
# Decision
# -----------------------------------------------------------------------------

def _interval(u: float, mu2: float) -> Tuple[float, float]:
    return float(ndtri(u)), float(ndtri(min(1.0, u + mu2)))


def _find_interval(rho: float, target: BinaryTarget, kappa1: float, eta: float) -> Strategy:
    """Slide an interval of Gaussian mass mu2 until the agreement reaches eta."""
    span = 1.0 - target.mu2
    grid = np.linspace(0.0, span, MONOTONE_GRID)
    values = np.array([agreement(rho, kappa1, _interval(u, target.mu2)) for u in grid])
    steps = np.diff(values)
    increasing = bool(np.all(steps >= -1e-9))
    if not increasing and not np.all(steps <= 1e-9):
        raise NisimError(ErrorCode.NONMONOTONE, "Agreement is not monotone in the interval position",
                         {"grid": grid.tolist(), "agreement": values.tolist()})

    lo, hi = 0.0, span
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        value = agreement(rho, kappa1, _interval(mid, target.mu2))
        if (value < eta) == increasing:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    best = min((lo, hi), key=lambda u: abs(agreement(rho, kappa1, _interval(u, target.mu2)) - eta))
    a, b = _interval(best, target.mu2)
    return Strategy(kappa1=kappa1, a=a, b=b, agreement=agreement(rho, kappa1, (a, b)))


def decide_k2(rho: float, target: BinaryTarget, delta: Optional[float] = None) -> Verdict:
    """FEASIBLE iff Corr_min - delta <= eta <= Corr_max + delta, with a witness strategy."""
    delta = settings.DECISION_TOLERANCE if delta is None else delta
    lo, hi = corr_bounds(rho, target.mu1, target.mu2)
    common = dict(rho=rho, target=target, corr_min=lo, corr_max=hi, tolerance=delta)
    if target.eta > hi + delta:
        return Verdict(status=VerdictStatus.INFEASIBLE, violated_bound="corr_max", gap=target.eta - hi, **common)
    if target.eta < lo - delta:
        return Verdict(status=VerdictStatus.INFEASIBLE, violated_bound="corr_min", gap=lo - target.eta, **common)

    kappa1 = float(ndtri(1.0 - target.mu1))
    strategy = _find_interval(rho, target, kappa1, float(np.clip(target.eta, lo, hi)))
    logger.info(f"decide_k2: FEASIBLE, interval [{strategy.a:.4g}, {strategy.b:.4g}] agreement {strategy.agreement:.6g}")
    return Verdict(status=VerdictStatus.FEASIBLE, strategy=strategy, **common)


# -----------------------------------------------------------------------------
# Maximal correlation
# -----------------------------------------------------------------------------

def max_correlation(P: FiniteJoint) -> MaxCorrelation:
    """Second singular value of P(x,y) / sqrt(P_X(x) P_Y(y)) over the supported rows and columns."""
    mass = P.array
    mass = mass[mass.sum(axis=1) > 0][:, mass.sum(axis=0) > 0]
    px, py = mass.sum(axis=1), mass.sum(axis=0)
    if min(mass.shape) < 2:
        logger.warning(f"{ErrorCode.DEGENERATE_MARGINAL.value}: a marginal is a point mass; maximal correlation is 0")
        return MaxCorrelation(rho=0.0, degenerate=True)
    M = mass / np.sqrt(np.outer(px, py))
    sv = linalg.svd(M, compute_uv=False)
    rho = float(np.clip(sv[1], 0.0, 1.0))
    if rho > 1.0 - SNAP_TOLERANCE:
        rho = 1.0
    elif rho < SNAP_TOLERANCE:
        rho = 0.0
    return MaxCorrelation(rho=rho, singular_values=sv.tolist())
