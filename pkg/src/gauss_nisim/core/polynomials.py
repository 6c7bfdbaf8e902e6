"""Scalar polynomials on Gaussian space used inside PPFs.

Three concrete forms exist: a Hermite series with exact moments, an affine
wrapper over any polynomial, and one coordinate of a factored map
(outer Bernstein approximant composed with inner Hermite polynomials).
Factored maps are evaluated once per input batch through a shared cache.
"""
from __future__ import annotations

import abc
import logging
from typing import Any, Dict, Mapping, Optional, Protocol

import numpy as np

from .errors import ErrorCode, NisimError
from .hermite import HermiteExpansion, MultiIndex

logger = logging.getLogger(__name__)

EvalCache = Dict[str, np.ndarray]


class PolynomialMap(Protocol):
    """Vector polynomial map R^n -> R^k with precomputed moments."""
    map_id: str
    n: int
    k: int
    degree: int
    means: np.ndarray
    variances: np.ndarray

    def evaluate(self, x: np.ndarray) -> np.ndarray: ...

    def to_json(self) -> dict: ...


class Polynomial(abc.ABC):
    n: int

    @property
    @abc.abstractmethod
    def degree(self) -> int:
        ...

    @abc.abstractmethod
    def evaluate(self, x: np.ndarray, cache: Optional[EvalCache] = None) -> np.ndarray:
        """Values at a batch of points; shape (N,)."""

    @abc.abstractmethod
    def mean(self) -> float:
        ...

    @abc.abstractmethod
    def variance(self) -> float:
        ...

    @abc.abstractmethod
    def to_json(self) -> dict:
        ...

    def affine(self, scale: float, shift: float) -> "Polynomial":
        """scale * p + shift."""
        return AffinePolynomial(self, scale, shift)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.evaluate(x[None, :])[0]
        return self.evaluate(x)


class HermitePolynomial(Polynomial):
    def __init__(self, expansion: HermiteExpansion):
        if expansion.k != 1:
            raise ValueError(f"HermitePolynomial needs a scalar expansion, got k={expansion.k}")
        self.expansion = expansion
        self.n = expansion.n

    @classmethod
    def from_terms(cls, n: int, terms: Mapping[tuple, float]) -> "HermitePolynomial":
        coeffs = {MultiIndex(tuple(S)): np.array([v]) for S, v in terms.items()}
        return cls(HermiteExpansion(n, 1, coeffs))

    @classmethod
    def constant(cls, n: int, value: float) -> "HermitePolynomial":
        return cls.from_terms(n, {(): value})

    @property
    def degree(self) -> int:
        return max((S.order for S in self.expansion.coeffs), default=0)

    def evaluate(self, x: np.ndarray, cache: Optional[EvalCache] = None) -> np.ndarray:
        return self.expansion.evaluate(x)[:, 0]

    def mean(self) -> float:
        return float(self.expansion.mean()[0])

    def variance(self) -> float:
        return float(self.expansion.variance()[0])

    def affine(self, scale: float, shift: float) -> "HermitePolynomial":
        zero = MultiIndex()

        def apply(S: MultiIndex, v: np.ndarray) -> np.ndarray:
            return v * scale + (shift if S == zero else 0.0)

        coeffs = {S: apply(S, v) for S, v in self.expansion.coeffs.items()}
        if zero not in coeffs:
            coeffs[zero] = np.array([shift])
        return HermitePolynomial(HermiteExpansion(self.n, 1, coeffs))

    def to_json(self) -> dict:
        data = self.expansion.to_json()
        return {"type": "hermite", "n": data["n"], "coeffs": data["coeffs"]}

    def __eq__(self, other: object) -> bool:
        return isinstance(other, HermitePolynomial) and self.expansion == other.expansion


class AffinePolynomial(Polynomial):
    """scale * base + shift, with nested wrappers flattened."""

    def __init__(self, base: Polynomial, scale: float, shift: float):
        if isinstance(base, AffinePolynomial):
            scale, shift = scale * base.scale, scale * base.shift + shift
            base = base.base
        self.base = base
        self.scale = float(scale)
        self.shift = float(shift)
        self.n = base.n

    @property
    def degree(self) -> int:
        return self.base.degree if self.scale != 0 else 0

    def evaluate(self, x: np.ndarray, cache: Optional[EvalCache] = None) -> np.ndarray:
        return self.scale * self.base.evaluate(x, cache) + self.shift

    def mean(self) -> float:
        return self.scale * self.base.mean() + self.shift

    def variance(self) -> float:
        return self.scale * self.scale * self.base.variance()

    def to_json(self) -> dict:
        return {"type": "affine", "scale": self.scale, "shift": self.shift, "base": self.base.to_json()}

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, AffinePolynomial)
            and (self.scale, self.shift) == (other.scale, other.shift)
            and self.base == other.base
        )


class ComposedPolynomial(Polynomial):
    """Coordinate ``coord`` of a factored polynomial map."""

    def __init__(self, poly_map: PolynomialMap, coord: int):
        if not 0 <= coord < poly_map.k:
            raise ValueError(f"Coordinate {coord} out of range for a map with k={poly_map.k}")
        self.map = poly_map
        self.coord = coord
        self.n = poly_map.n

    @property
    def degree(self) -> int:
        return self.map.degree

    def evaluate(self, x: np.ndarray, cache: Optional[EvalCache] = None) -> np.ndarray:
        if cache is None:
            return self.map.evaluate(x)[:, self.coord]
        values = cache.get(self.map.map_id)
        if values is None:
            values = self.map.evaluate(x)
            cache[self.map.map_id] = values
        return values[:, self.coord]

    def mean(self) -> float:
        return float(self.map.means[self.coord])

    def variance(self) -> float:
        return float(self.map.variances[self.coord])

    def to_json(self) -> dict:
        return {"type": "composed", "map": self.map.map_id, "coord": self.coord}

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, ComposedPolynomial)
            and self.coord == other.coord
            and self.map.map_id == other.map.map_id
        )


def polynomial_from_json(data: Mapping[str, Any], maps: Optional[Mapping[str, PolynomialMap]] = None) -> Polynomial:
    kind = data.get("type", "hermite")
    if kind == "hermite":
        return HermitePolynomial(HermiteExpansion.from_json({"n": data["n"], "k": 1, "coeffs": data["coeffs"]}))
    if kind == "affine":
        return AffinePolynomial(polynomial_from_json(data["base"], maps), data["scale"], data["shift"])
    if kind == "composed":
        if not maps or data["map"] not in maps:
            raise NisimError(ErrorCode.INVALID_INPUT, f"Polynomial references unknown map {data.get('map')!r}")
        return ComposedPolynomial(maps[data["map"]], int(data["coord"]))
    raise NisimError(ErrorCode.INVALID_INPUT, f"Unknown polynomial type {kind!r}")
