"""
Multivariate Bernstein approximation.

BP_{f,d_1..d_l}(x) = sum_{k_j <= d_j} f(k_1/d_1, ..., k_l/d_l) prod_j p_{k_j,d_j}(x_j)
with p_{k,d}(x) = C(d,k) x^k (1-x)^{d-k}. For an L-Lipschitz f the sup error on
the unit box is at most (L/2) (sum_j 1/d_j)^{1/2}.

Ball approximants rescale the box onto the bounding box of B(c, r) and extend f
outside the ball by composing with the Euclidean ball projection. Composed maps
(outer approximant o inner Hermite polynomials) stay factored.
"""
from __future__ import annotations

import enum
import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import binom

from .errors import ErrorCode, NisimError
from .functions import FunctionForm, RangeRegion, VectorFunction
from .hermite import HermiteExpansion
from .simplex import proj_simplex
from .utils.config import settings
from .utils.jsonio import read_sidecar, write_sidecar
from .utils.rng import STREAM_SMOOTH_RADIUS, stream_generator

logger = logging.getLogger(__name__)

BOX_TOLERANCE = 1e-12
# Bound on intermediate tensor entries held at once during evaluation.
EVAL_CHUNK_ENTRIES = 8_000_000


def bernstein_weights(d: int, x: Union[float, np.ndarray]) -> np.ndarray:
    """p_{0,d}(x) .. p_{d,d}(x); shape (d+1,) for scalar x, (N, d+1) for arrays."""
    if d < 0:
        raise NisimError(ErrorCode.INVALID_INPUT, f"Bernstein degree must be >= 0, got {d}")
    arr = np.asarray(x, dtype=float)
    if np.any(arr < -BOX_TOLERANCE) or np.any(arr > 1 + BOX_TOLERANCE) or not np.all(np.isfinite(arr)):
        raise NisimError(ErrorCode.OUT_OF_BOX, "Bernstein weights need x in [0, 1]")
    arr = np.clip(arr, 0.0, 1.0)
    ks = np.arange(d + 1)
    return binom.pmf(ks, d, arr[..., None])


# ----- Domains -----

class DomainKind(str, enum.Enum):
    UNIT_BOX = "unit_box"
    BALL = "ball"


@dataclass(frozen=True)
class Domain:
    kind: DomainKind = DomainKind.UNIT_BOX
    center: Tuple[float, ...] = ()
    radius: float = 0.5

    @classmethod
    def ball(cls, center: Sequence[float], radius: float) -> "Domain":
        if not radius > 0:
            raise NisimError(ErrorCode.INVALID_INPUT, f"Ball radius must be > 0, got {radius}")
        return cls(DomainKind.BALL, tuple(float(c) for c in center), float(radius))

    def to_box(self, z: np.ndarray) -> np.ndarray:
        """Ambient points to box coordinates, clamped into [0, 1]."""
        if self.kind is DomainKind.UNIT_BOX:
            return np.clip(z, 0.0, 1.0)
        c = np.asarray(self.center)
        return np.clip((z - c) / (2.0 * self.radius) + 0.5, 0.0, 1.0)

    def from_box(self, u: np.ndarray) -> np.ndarray:
        if self.kind is DomainKind.UNIT_BOX:
            return u
        return np.asarray(self.center) + (u - 0.5) * 2.0 * self.radius

    def to_json(self) -> dict:
        if self.kind is DomainKind.UNIT_BOX:
            return {"type": self.kind.value}
        return {"type": self.kind.value, "center": list(self.center), "radius": self.radius}

    @classmethod
    def from_json(cls, data: dict) -> "Domain":
        if data.get("type", "unit_box") == DomainKind.UNIT_BOX.value:
            return cls()
        return cls.ball(data["center"], data["radius"])


def project_ball(z: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto B(center, radius): c + r (z - c)/||z - c|| outside."""
    diff = z - center
    norm = np.linalg.norm(diff, axis=-1, keepdims=True)
    scale = np.where(norm > radius, radius / np.where(norm > 0, norm, 1.0), 1.0)
    return center + diff * scale


# ----- Approximant -----

@dataclass(eq=False)
class BernsteinApprox:
    degrees: Tuple[int, ...]
    values: np.ndarray = field(repr=False)
    domain: Domain = field(default_factory=Domain)
    capped: bool = False

    def __post_init__(self):
        self.degrees = tuple(int(d) for d in self.degrees)
        shape = tuple(d + 1 for d in self.degrees)
        values = np.asarray(self.values, dtype=float)
        if values.shape == shape:
            values = values[..., None]
        if values.shape[:-1] != shape:
            raise ValueError(f"Value tensor shape {values.shape} does not match degrees {self.degrees}")
        self.values = values

    @property
    def dim(self) -> int:
        return len(self.degrees)

    @property
    def out_dim(self) -> int:
        return self.values.shape[-1]

    @property
    def total_degree(self) -> int:
        return sum(self.degrees)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.degrees, self.domain.to_json())).encode())
        h.update(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        return h.hexdigest()

    def to_json(self, sidecar: Optional[Union[str, Path]] = None) -> dict:
        out = {"degrees": list(self.degrees), "domain": self.domain.to_json(), "out_dim": self.out_dim}
        if sidecar is not None:
            write_sidecar(sidecar, self.values)
            out["values_ref"] = Path(sidecar).name
        else:
            out["values"] = self.values.reshape(-1).tolist()
        return out

    @classmethod
    def from_json(cls, data: dict, base_dir: Optional[Union[str, Path]] = None) -> "BernsteinApprox":
        degrees = tuple(int(d) for d in data["degrees"])
        shape = tuple(d + 1 for d in degrees) + (int(data.get("out_dim", 1)),)
        if "values_ref" in data:
            values = read_sidecar(Path(base_dir or ".") / data["values_ref"], shape)
        else:
            values = np.asarray(data["values"], dtype=float).reshape(shape)
        return cls(degrees, values, Domain.from_json(data.get("domain", {})))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BernsteinApprox):
            return NotImplemented
        return (self.degrees, self.domain) == (other.degrees, other.domain) and np.array_equal(self.values, other.values)


def _box_grid(degrees: Sequence[int]) -> np.ndarray:
    axes = [np.arange(d + 1) / d for d in degrees]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def bp_fit(f: Callable[[np.ndarray], np.ndarray], degrees: Sequence[int],
           domain: Optional[Domain] = None) -> BernsteinApprox:
    """Sample f on the grid (k_1/d_1, ..., k_l/d_l) mapped into ``domain``."""
    degrees = tuple(int(d) for d in degrees)
    if any(d < 1 for d in degrees):
        raise NisimError(ErrorCode.INVALID_INPUT, f"Bernstein degrees must be >= 1, got {degrees}")
    domain = domain or Domain()
    u = _box_grid(degrees)
    vals = np.asarray(f(domain.from_box(u)), dtype=float)
    vals = vals.reshape(tuple(d + 1 for d in degrees) + (-1,))
    return BernsteinApprox(degrees, vals, domain)


def bp_eval(a: BernsteinApprox, x: np.ndarray) -> np.ndarray:
    """Evaluate at points (ambient coordinates for balls); out_dim 1 gives shape (N,)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != a.dim:
        raise NisimError(ErrorCode.DIM_MISMATCH, f"Approximant takes {a.dim} inputs, got {X.shape[1]}")
    if a.domain.kind is DomainKind.UNIT_BOX and (np.any(X < -BOX_TOLERANCE) or np.any(X > 1 + BOX_TOLERANCE)):
        raise NisimError(ErrorCode.OUT_OF_BOX, "Unit-box approximant evaluated outside [0, 1]^l")
    U = a.domain.to_box(X)

    rest = int(np.prod(a.values.shape[1:]))
    chunk = max(1, EVAL_CHUNK_ENTRIES // max(rest, 1))
    out = np.empty((U.shape[0], a.out_dim))
    head = a.values.reshape(a.degrees[0] + 1, rest)
    for start in range(0, U.shape[0], chunk):
        Uc = U[start:start + chunk]
        T = (bernstein_weights(a.degrees[0], Uc[:, 0]) @ head).reshape((Uc.shape[0],) + a.values.shape[1:])
        for j in range(1, a.dim):
            W = bernstein_weights(a.degrees[j], Uc[:, j])
            T = np.einsum("nb,nb...->n...", W, T)
        out[start:start + chunk] = T
    result = out[:, 0] if a.out_dim == 1 else out
    return result[0] if single else result


# ----- Ball approximants -----

def bernstein_degree(ell: int, radius: float, eta: float) -> float:
    """Per-variable degree ell * 4 r^2 / eta^2 (before rounding up)."""
    if not eta > 0:
        raise NisimError(ErrorCode.INVALID_INPUT, f"eta must be > 0, got {eta}")
    return ell * 4.0 * radius * radius / (eta * eta)


def _capped_degree(requested: float, ell: int, cap: int) -> Tuple[int, bool]:
    degree = max(1, math.ceil(requested - 1e-9)) if math.isfinite(requested) else math.inf
    if degree != math.inf and (degree + 1) ** ell <= cap:
        return int(degree), False
    allowed = max(1, int(math.floor(cap ** (1.0 / ell) + 1e-9)) - 1)
    return allowed, True


def bp_on_ball(
    f: Callable[[np.ndarray], np.ndarray],
    center: Sequence[float],
    radius: float,
    eta: float,
    cap: Optional[int] = None,
) -> BernsteinApprox:
    """Approximant of a 1-Lipschitz f on B(center, radius) with sup error <= eta.

    Outside the ball f is replaced by f o Proj_B. When (d+1)^l exceeds ``cap``
    the degree is lowered and the result is flagged ``capped``.
    """
    center_arr = np.asarray(center, dtype=float)
    ell = center_arr.shape[0]
    cap = cap or settings.BERNSTEIN_DEGREE_CAP
    requested = bernstein_degree(ell, radius, eta)
    degree, capped = _capped_degree(requested, ell, cap)
    if capped:
        logger.warning(
            f"{ErrorCode.DEGREE_BLOWUP.value}: per-variable degree {requested:.4g} exceeds cap "
            f"{cap} grid values in {ell} variables; using {degree}"
        )

    def extended(z: np.ndarray) -> np.ndarray:
        return f(project_ball(z, center_arr, radius))

    approx = bp_fit(extended, (degree,) * ell, Domain.ball(center_arr, radius))
    approx.capped = capped
    return approx


def tail_radius(d: int, k: int, delta: float, sigma: float) -> float:
    """r = log(2dk/delta)^{d/2} * sigma, computed in log space."""
    base = math.log(max(2.0 * max(d, 1) * k / delta, math.e))
    log_r = 0.5 * max(d, 1) * math.log(base) + math.log(sigma)
    return math.inf if log_r > 700 else math.exp(log_r)


# ----- Factored composition -----

@dataclass(eq=False)
class FactoredPolyMap:
    """outer o inner: inner Hermite polynomials R^n -> R^l, outer Bernstein R^l -> R^k."""
    inner: HermiteExpansion
    outer: BernsteinApprox
    means: np.ndarray
    variances: np.ndarray
    map_id: str = ""

    def __post_init__(self):
        if self.outer.dim != self.inner.k:
            raise NisimError(ErrorCode.DIM_MISMATCH, "Outer approximant arity must equal the inner output count")
        self.means = np.asarray(self.means, dtype=float)
        self.variances = np.asarray(self.variances, dtype=float)
        if not self.map_id:
            h = hashlib.sha256(self.outer.digest().encode())
            h.update(repr(self.inner.to_json()).encode())
            self.map_id = h.hexdigest()[:16]

    @property
    def n(self) -> int:
        return self.inner.n

    @property
    def k(self) -> int:
        return self.outer.out_dim

    @property
    def degree(self) -> int:
        return int(self.inner.max_degree) * self.outer.total_degree

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        out = bp_eval(self.outer, self.inner.evaluate(x))
        return out.reshape(-1, self.k)

    def as_function(self, name: str = "f_sm_prime") -> VectorFunction:
        return VectorFunction(self.n, self.k, self.evaluate, FunctionForm.FACTORED_POLY,
                              RangeRegion.ANY, self, name)

    def to_json(self, sidecar_dir: Optional[Union[str, Path]] = None) -> dict:
        sidecar = Path(sidecar_dir) / f"{self.map_id}.f8" if sidecar_dir is not None else None
        return {
            "id": self.map_id,
            "inner": self.inner.to_json(),
            "outer": self.outer.to_json(sidecar),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict, base_dir: Optional[Union[str, Path]] = None) -> "FactoredPolyMap":
        return cls(
            HermiteExpansion.from_json(data["inner"]),
            BernsteinApprox.from_json(data["outer"], base_dir),
            np.asarray(data["means"]),
            np.asarray(data["variances"]),
            data.get("id", ""),
        )


class RadiusMode(str, enum.Enum):
    EMPIRICAL = "empirical"
    MEASURED = "measured"
    WORST_CASE = "worst_case"


@dataclass
class SmoothPolyResult:
    poly_map: FactoredPolyMap
    radius: float
    radius_mode: RadiusMode
    requested_degree: float
    degree: int
    capped: bool
    tail_prob: float
    tail_stderr: float
    samples: int
    delta: float

    @property
    def tail_bound(self) -> float:
        return self.delta / 2.0

    @property
    def tail_ok(self) -> bool:
        return self.tail_prob <= self.tail_bound + 3.0 * self.tail_stderr


def smooth_poly(
    inner: HermiteExpansion,
    delta: float,
    radius_mode: RadiusMode = RadiusMode.EMPIRICAL,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
    cap: Optional[int] = None,
    stream_offset: int = 0,
) -> SmoothPolyResult:
    """Replace Proj o p by a Bernstein approximant of Proj composed with p.

    The approximant lives on the ball about (E p_1, ..., E p_k) with per-variable
    degree k * 4 r^2 * 16 / delta^2. The returned tail probability estimates
    Pr[||Proj(p) - p'||_inf > delta/4].
    """
    if not delta > 0:
        raise NisimError(ErrorCode.INVALID_INPUT, f"delta must be > 0, got {delta}")
    k, d = inner.k, int(inner.max_degree)
    samples = samples or settings.MC_SAMPLES
    seed = settings.DEFAULT_SEED if seed is None else seed
    x = stream_generator(seed, STREAM_SMOOTH_RADIUS + 2 * stream_offset).standard_normal((samples, inner.n))
    p = inner.evaluate(x)
    mu = inner.mean()

    if radius_mode is RadiusMode.EMPIRICAL:
        dist = np.linalg.norm(p - mu, axis=1)
        radius = float(np.quantile(dist, 1.0 - delta / 4.0))
    else:
        sigma = k ** 4 / delta ** 2 if radius_mode is RadiusMode.WORST_CASE else math.sqrt(float(inner.variance().max()))
        radius = tail_radius(d, k, delta, sigma)
    radius = max(radius, 1e-6)

    requested = bernstein_degree(k, radius, delta / 4.0)
    outer = bp_on_ball(proj_simplex, mu, radius, delta / 4.0, cap)

    # moments of the composed polynomials, on a second independent sample
    x_mom = stream_generator(seed, STREAM_SMOOTH_RADIUS + 2 * stream_offset + 1).standard_normal((samples, inner.n))
    vals_mom = bp_eval(outer, inner.evaluate(x_mom)).reshape(samples, k)
    poly_map = FactoredPolyMap(inner, outer, vals_mom.mean(axis=0), vals_mom.var(axis=0, ddof=1))

    approx = poly_map.evaluate(x)
    exceed = np.max(np.abs(proj_simplex(p) - approx), axis=1) > delta / 4.0
    tail = float(exceed.mean())
    tail_se = float(exceed.std(ddof=1) / math.sqrt(samples))
    logger.info(
        f"smooth_poly: radius={radius:.4g} ({radius_mode.value}), degree {outer.degrees[0]} "
        f"per variable{' (capped)' if outer.capped else ''}, tail={tail:.4g}"
    )
    return SmoothPolyResult(poly_map, radius, radius_mode, requested, outer.degrees[0],
                            outer.capped, tail, tail_se, samples, delta)
