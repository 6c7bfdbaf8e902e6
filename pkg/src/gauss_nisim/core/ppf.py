"""
Polynomial plurality functions (PPFs) and their mixtures.

PPF_{p,j}(x) = argmax(0, ..., p(x), ..., 0) is e_j when p(x) > 0 and the zero
vector otherwise. Coordinates j are 0-based.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ErrorCode, NisimError
from .functions import FunctionForm, RangeRegion, VectorFunction
from .polynomials import EvalCache, Polynomial, PolynomialMap, polynomial_from_json

logger = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-24
BALANCE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PpfSpec:
    poly: Polynomial
    j: int
    k: int
    balance: Optional[Tuple[int, float]] = None

    def __post_init__(self):
        if not 0 <= self.j < self.k:
            raise ValueError(f"PPF coordinate {self.j} out of range for k={self.k}")

    @property
    def degree(self) -> int:
        return self.poly.degree

    @property
    def n(self) -> int:
        return self.poly.n

    def to_json(self) -> dict:
        out = {"j": self.j, "poly": self.poly.to_json()}
        if self.balance is not None:
            out["balance"] = {"d": self.balance[0], "delta": self.balance[1]}
        return out

    @classmethod
    def from_json(cls, data: Mapping[str, Any], k: int, maps: Optional[Mapping[str, PolynomialMap]] = None) -> "PpfSpec":
        bal = data.get("balance")
        balance = (int(bal["d"]), float(bal["delta"])) if bal else None
        return cls(polynomial_from_json(data["poly"], maps), int(data["j"]), k, balance)


def ppf_eval(ppf: PpfSpec, x: np.ndarray, cache: Optional[EvalCache] = None) -> np.ndarray:
    """e_j where p(x) > 0, zero elsewhere; batch input gives shape (N, k)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != ppf.n:
        raise NisimError(ErrorCode.DIM_MISMATCH, f"PPF polynomial takes {ppf.n} inputs, got {X.shape[1]}")
    out = np.zeros((X.shape[0], ppf.k))
    out[:, ppf.j] = ppf.poly.evaluate(X, cache) > 0
    return out[0] if single else out


# -----------------------------------------------------------------------------
# Balancing
# -----------------------------------------------------------------------------

def balance_bound(d: int, delta: float) -> float:
    """d * log(1/delta)^{d/2}, evaluated in log space; +inf on overflow."""
    if not 0 < delta < 1:
        raise NisimError(ErrorCode.INVALID_INPUT, f"Balance delta must lie in (0, 1), got {delta}")
    if d <= 0:
        return 0.0
    log_b = math.log(d) + 0.5 * d * math.log(math.log(1.0 / delta))
    return math.inf if log_b > 700 else math.exp(log_b)


def is_balanced(ppf: PpfSpec, d: int, delta: float) -> bool:
    var = ppf.poly.variance()
    return abs(var - 1.0) <= BALANCE_TOLERANCE and abs(ppf.poly.mean()) <= balance_bound(d, delta)


def balance_ppf(ppf: PpfSpec, delta: float, degree: Optional[int] = None) -> PpfSpec:
    """(d, delta)-balanced version of a PPF.

    The polynomial is rescaled to unit variance; when its mean then exceeds
    d * log(1/delta)^{d/2} in absolute value it is recentred at that bound
    with the original sign.
    """
    d = ppf.degree if degree is None else degree
    var = ppf.poly.variance()
    if var <= VARIANCE_FLOOR:
        raise NisimError(ErrorCode.ZERO_VARIANCE, f"PPF polynomial has variance {var:.3g}")
    if is_balanced(ppf, d, delta):
        return replace(ppf, balance=(d, delta))

    sigma = math.sqrt(var)
    mu = ppf.poly.mean() / sigma
    bound = balance_bound(d, delta)
    shift = 0.0
    if abs(mu) > bound:
        shift = -mu + math.copysign(bound, mu)
        logger.debug(f"balance_ppf: mean {mu:.4g} clamped to {math.copysign(bound, mu):.4g} (d={d})")
    return PpfSpec(ppf.poly.affine(1.0 / sigma, shift), ppf.j, ppf.k, (d, delta))


# -----------------------------------------------------------------------------
# Mixtures
# -----------------------------------------------------------------------------

@dataclass
class PpfMixture:
    """Weighted sum of PPFs; evaluations lie in [0, 1]^k when weights per coordinate sum to <= 1."""
    n: int
    k: int
    terms: List[Tuple[float, PpfSpec]] = field(default_factory=list)
    m: int = 1
    maps: Dict[str, PolynomialMap] = field(default_factory=dict)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(x, dtype=float))
        cache: EvalCache = {}
        out = np.zeros((X.shape[0], self.k))
        for w, spec in self.terms:
            out[:, spec.j] += w * (spec.poly.evaluate(X, cache) > 0)
        return out

    def as_function(self, name: str = "") -> VectorFunction:
        return VectorFunction(self.n, self.k, self.evaluate, FunctionForm.PPF_MIXTURE,
                              RangeRegion.UNIT_ORTHANT, self, name)

    @property
    def ppf_count(self) -> int:
        return len(self.terms)

    @property
    def balanced_count(self) -> int:
        return sum(1 for _, spec in self.terms if spec.balance is not None)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "m": self.m,
            "terms": [{"w": w, **spec.to_json()} for w, spec in self.terms],
            "maps": {key: mp.to_json() for key, mp in self.maps.items()},
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any], maps: Optional[Mapping[str, PolynomialMap]] = None) -> "PpfMixture":
        """Parse a mixture; factored maps must already be decoded into ``maps``."""
        maps = dict(maps or {})
        k = int(data["k"])
        terms = [(float(t["w"]), PpfSpec.from_json(t, k, maps)) for t in data["terms"]]
        return cls(int(data["n"]), k, terms, int(data.get("m", 1)), maps)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PpfMixture):
            return NotImplemented
        if (self.n, self.k, self.m, len(self.terms)) != (other.n, other.k, other.m, len(other.terms)):
            return False
        return all(
            w1 == w2 and s1.j == s2.j and s1.balance == s2.balance and s1.poly == s2.poly
            for (w1, s1), (w2, s2) in zip(self.terms, other.terms)
        )


def threshold_mixture(
    polys: Sequence[Polynomial],
    eta: float,
    delta: float,
    m: Optional[int] = None,
    balance_degree: Optional[int] = None,
    maps: Optional[Mapping[str, PolynomialMap]] = None,
) -> PpfMixture:
    """sum_s sum_{j<m} (1/m) PPF_{p_s - eta*j, s}, each term balanced where possible.

    Terms whose polynomial is constant cannot be balanced and are kept as is.
    """
    if not polys:
        raise NisimError(ErrorCode.INVALID_INPUT, "threshold_mixture needs at least one polynomial")
    k = len(polys)
    n = polys[0].n
    m = m or math.ceil(1.0 / eta - 1e-9)
    terms: List[Tuple[float, PpfSpec]] = []
    unbalanced = 0
    for s, p in enumerate(polys):
        for j in range(m):
            spec = PpfSpec(p.affine(1.0, -eta * j), s, k)
            try:
                spec = balance_ppf(spec, delta, balance_degree)
            except NisimError as e:
                if e.code is not ErrorCode.ZERO_VARIANCE:
                    raise
                unbalanced += 1
            terms.append((1.0 / m, spec))
    if unbalanced:
        logger.info(f"threshold_mixture: {unbalanced} constant terms left unbalanced")
    return PpfMixture(n, k, terms, m, dict(maps or {}))
