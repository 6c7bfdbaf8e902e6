"""
Normalized probabilists' Hermite basis on Gaussian space.

H_0 = 1, H_1 = x and H_{q+1} = (x H_q - sqrt(q) H_{q-1}) / sqrt(q+1), so that
{H_q} is orthonormal under the standard Gaussian. Multivariate elements are
products over coordinates, H_S(x) = prod_i H_{S_i}(x_i).
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ErrorCode, NisimError

logger = logging.getLogger(__name__)

# Coefficient vectors whose entries are all below this are not stored.
DROP_TOLERANCE = 1e-12

ArrayLike = Union[float, Sequence[float], np.ndarray]


# -----------------------------------------------------------------------------
# Multi-indices
# -----------------------------------------------------------------------------

@dataclass(frozen=True, order=False)
class MultiIndex:
    """Multi-index S in Z^{*n}; trailing zeros are trimmed on construction."""
    entries: Tuple[int, ...] = ()

    def __post_init__(self):
        entries = tuple(int(e) for e in self.entries)
        if any(e < 0 for e in entries):
            raise ValueError(f"Multi-index entries must be non-negative, got {entries}")
        while entries and entries[-1] == 0:
            entries = entries[:-1]
        object.__setattr__(self, "entries", entries)

    @classmethod
    def of(cls, *entries: int) -> "MultiIndex":
        return cls(tuple(entries))

    @property
    def order(self) -> int:
        return sum(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def padded(self, n: int) -> Tuple[int, ...]:
        if len(self.entries) > n:
            raise ValueError(f"Multi-index {self.entries} does not fit dimension {n}")
        return self.entries + (0,) * (n - len(self.entries))

    def sort_key(self) -> Tuple[int, Tuple[int, ...]]:
        return (self.order, self.entries)

    def __repr__(self) -> str:
        return f"MultiIndex{self.entries}"


def as_index(S: Union[MultiIndex, Iterable[int]]) -> MultiIndex:
    return S if isinstance(S, MultiIndex) else MultiIndex(tuple(S))


def enumerate_indices(n: int, d: int) -> List[MultiIndex]:
    """All S in Z^{*n} with |S| <= d, ordered by degree then entries."""
    out = [MultiIndex(s) for s in itertools.product(range(d + 1), repeat=n) if sum(s) <= d]
    return sorted(set(out), key=MultiIndex.sort_key)


# -----------------------------------------------------------------------------
# Evaluation
# -----------------------------------------------------------------------------

def hermite_table(q_max: int, x: ArrayLike) -> np.ndarray:
    """Stack of H_0..H_{q_max} evaluated at x; shape (q_max+1, *x.shape)."""
    x = np.asarray(x, dtype=float)
    table = np.empty((q_max + 1,) + x.shape, dtype=float)
    table[0] = 1.0
    if q_max >= 1:
        table[1] = x
    with np.errstate(over="ignore", invalid="ignore"):
        leading = np.copysign(np.inf, x)
        for q in range(1, q_max):
            row = (x * table[q] - np.sqrt(q) * table[q - 1]) / np.sqrt(q + 1)
            # inf - inf past the overflow point; the leading term x^q dominates there
            table[q + 1] = np.where(np.isnan(row) & np.isfinite(x), leading ** (q + 1), row)
    return table


def hermite_1d(q: int, x: ArrayLike) -> Union[float, np.ndarray]:
    """Normalized Hermite polynomial H_q at x (scalar in, scalar out)."""
    if q < 0:
        raise ValueError(f"Hermite order must be non-negative, got {q}")
    value = hermite_table(q, x)[q]
    return float(value) if np.ndim(value) == 0 else value


def hermite_multi(S: Union[MultiIndex, Sequence[int]], x: ArrayLike) -> Union[float, np.ndarray]:
    """H_S at a point (shape (n,)) or at a batch of points (shape (N, n))."""
    S = as_index(S)
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if len(S) > n:
        raise ValueError(f"Multi-index {S.entries} longer than input dimension {n}")
    out = np.ones(x.shape[:-1], dtype=float)
    for i, q in enumerate(S.entries):
        if q:
            out = out * hermite_table(q, x[..., i])[q]
    return float(out) if out.ndim == 0 else out


def basis_matrix(indices: Sequence[MultiIndex], x: np.ndarray) -> np.ndarray:
    """Matrix [H_S(x_r)] with one row per point and one column per index."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1]
    q_max = max((max(S.entries, default=0) for S in indices), default=0)
    tables = [hermite_table(q_max, x[:, i]) for i in range(n)]
    out = np.ones((x.shape[0], len(indices)), dtype=float)
    for c, S in enumerate(indices):
        for i, q in enumerate(S.padded(n)):
            if q:
                out[:, c] *= tables[i][q]
    return out


# -----------------------------------------------------------------------------
# Expansions
# -----------------------------------------------------------------------------

@dataclass(eq=False)
class HermiteExpansion:
    """Sparse Hermite expansion of a map R^n -> R^k.

    ``coeffs`` maps multi-indices to length-k coefficient vectors; ``stderr``
    is populated by Monte Carlo estimation only.
    """
    n: int
    k: int
    coeffs: Dict[MultiIndex, np.ndarray] = field(default_factory=dict)
    max_degree: Optional[int] = None
    stderr: Optional[Dict[MultiIndex, np.ndarray]] = None

    def __post_init__(self):
        cleaned: Dict[MultiIndex, np.ndarray] = {}
        for S, v in self.coeffs.items():
            S = as_index(S)
            if len(S) > self.n:
                raise ValueError(f"Index {S.entries} exceeds input dimension {self.n}")
            v = np.asarray(v, dtype=float).reshape(self.k)
            if not np.all(np.isfinite(v)):
                raise NisimError(ErrorCode.NON_FINITE_INPUT, f"Non-finite coefficient at {S.entries}")
            if np.max(np.abs(v)) < DROP_TOLERANCE:
                continue
            cleaned[S] = v
        top = max((S.order for S in cleaned), default=0)
        if self.max_degree is None:
            self.max_degree = top
        elif top > self.max_degree:
            raise NisimError(
                ErrorCode.DEGREE_EXCEEDED,
                f"Stored index of degree {top} exceeds max_degree {self.max_degree}",
            )
        self.coeffs = dict(sorted(cleaned.items(), key=lambda kv: kv[0].sort_key()))
        if self.stderr is not None:
            self.stderr = {as_index(S): np.asarray(v, dtype=float).reshape(self.k) for S, v in self.stderr.items()}

    # ----- accessors -----

    def indices(self) -> List[MultiIndex]:
        return list(self.coeffs)

    def coefficient(self, S: Union[MultiIndex, Sequence[int]]) -> np.ndarray:
        return self.coeffs.get(as_index(S), np.zeros(self.k)).copy()

    def weight(self, d: Optional[int] = None) -> float:
        """W^{<=d}: sum of squared coefficient norms up to degree d."""
        return float(sum(np.dot(v, v) for S, v in self.coeffs.items() if d is None or S.order <= d))

    def mean(self) -> np.ndarray:
        return self.coefficient(MultiIndex())

    def variance(self) -> np.ndarray:
        """Per-coordinate variance, sum over S != 0 of the squared coefficients."""
        out = np.zeros(self.k)
        for S, v in self.coeffs.items():
            if S.order:
                out += v * v
        return out

    def matrix(self, indices: Sequence[MultiIndex]) -> np.ndarray:
        """Coefficients stacked in the order of ``indices``; shape (len, k)."""
        return np.array([self.coefficient(S) for S in indices]).reshape(len(indices), self.k)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if not self.coeffs:
            return np.zeros((x.shape[0], self.k))
        idx = self.indices()
        return basis_matrix(idx, x) @ self.matrix(idx)

    def map_coefficients(self, fn) -> "HermiteExpansion":
        """New expansion with ``fn(S, v)`` applied to every stored coefficient."""
        coeffs = {S: fn(S, v) for S, v in self.coeffs.items()}
        stderr = None
        if self.stderr is not None:
            stderr = {S: np.abs(fn(S, v)) for S, v in self.stderr.items()}
        return HermiteExpansion(self.n, self.k, coeffs, self.max_degree, stderr)

    def truncate(self, d: int) -> "HermiteExpansion":
        coeffs = {S: v for S, v in self.coeffs.items() if S.order <= d}
        return HermiteExpansion(self.n, self.k, coeffs, min(d, self.max_degree))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HermiteExpansion):
            return NotImplemented
        if (self.n, self.k, self.max_degree) != (other.n, other.k, other.max_degree):
            return False
        if self.coeffs.keys() != other.coeffs.keys():
            return False
        return all(np.array_equal(v, other.coeffs[S]) for S, v in self.coeffs.items())

    # ----- serialization -----

    def to_json(self) -> dict:
        out = {
            "n": self.n,
            "k": self.k,
            "d": self.max_degree,
            "coeffs": [{"S": list(S.entries), "v": v.tolist()} for S, v in self.coeffs.items()],
        }
        if self.stderr is not None:
            out["stderr"] = [{"S": list(S.entries), "v": v.tolist()} for S, v in self.stderr.items()]
        return out

    @classmethod
    def from_json(cls, data: dict) -> "HermiteExpansion":
        coeffs = {MultiIndex(tuple(c["S"])): np.asarray(c["v"], dtype=float) for c in data.get("coeffs", [])}
        stderr = None
        if "stderr" in data:
            stderr = {MultiIndex(tuple(c["S"])): np.asarray(c["v"], dtype=float) for c in data["stderr"]}
        return cls(int(data["n"]), int(data["k"]), coeffs, data.get("d"), stderr)

    @classmethod
    def from_matrix(cls, n: int, indices: Sequence[MultiIndex], matrix: np.ndarray,
                    max_degree: Optional[int] = None) -> "HermiteExpansion":
        matrix = np.asarray(matrix, dtype=float)
        k = matrix.shape[1] if matrix.ndim == 2 else 1
        coeffs = {S: matrix[i] for i, S in enumerate(indices)}
        if max_degree is None:
            max_degree = max((S.order for S in indices), default=0)
        return cls(n, k, coeffs, max_degree)


class HermiteBasis:
    """Orthonormal family {H_S : |S| <= d} used as a boosting basis.

    The first element is always the constant H_0 = 1.
    """

    def __init__(self, n: int, d: int):
        self.n = n
        self.d = d
        self.indices = enumerate_indices(n, d)

    def __len__(self) -> int:
        return len(self.indices)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Basis values at points; shape (N, m)."""
        return basis_matrix(self.indices, x)
