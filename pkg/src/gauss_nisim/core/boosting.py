"""
Spectrum-matching by iterated projection.

Given a simplex-valued F and an orthonormal basis g_1..g_m (g_1 = 1), the
iteration

    J_t = sum_i (beta_i - beta_{t,i}) g_i,   G_{t+1} = G_t + J_t / 2,   F_{t+1} = Proj(G_{t+1})

starting from F_0 = G_0 = (1/k, ..., 1/k) stops once rho_t^2 = ||beta_t - beta||^2
drops to delta. The potential Psi(t) = E<F - F_t, F - 2 G_t + F_t> is non-negative
and falls by at least rho_t^2 / 4 per step, so at most 4/delta steps run.

All expectations are taken on one fixed set of estimator nodes, so beta and
beta_t share their noise.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Protocol, Sequence, Union

import numpy as np
from scipy.special import ndtri

from .errors import ErrorCode, NisimError
from .functions import FunctionForm, RangeRegion, VectorFunction, in_simplex
from .hermite import HermiteBasis, HermiteExpansion, MultiIndex, basis_matrix
from .sampling import Estimator, MonteCarlo, Quadrature, make_estimator
from .simplex import proj_simplex
from .spectral import fsm_degree
from .utils.config import settings
from .utils.rng import STREAM_BOOST

logger = logging.getLogger(__name__)

QUADRATURE_TOLERANCE = 1e-8
# Quadrature nodes per axis used for matching when 2d+4 would be too coarse
# for discontinuous targets.
DENSE_NODES = {1: 256, 2: 48, 3: 16}


class Basis(Protocol):
    def __len__(self) -> int: ...

    def evaluate(self, x: np.ndarray) -> np.ndarray: ...


# ----- Results -----

@dataclass(frozen=True)
class TraceRow:
    t: int
    rho_sq: float
    psi: float
    alignment: float


@dataclass
class BoostState:
    """Single-owner iteration state; G_t = basis @ kappa and F_t = Proj(G_t)."""
    t: int
    kappa: np.ndarray
    beta_t: np.ndarray
    rho_sq: float
    psi: float

    def G(self, basis: Basis, x: np.ndarray) -> np.ndarray:
        return basis.evaluate(x) @ self.kappa

    def F(self, basis: Basis, x: np.ndarray) -> np.ndarray:
        return proj_simplex(self.G(basis, x))


@dataclass
class ProjectedPolynomial:
    """Proj o p for a vector Hermite polynomial p."""
    inner: HermiteExpansion

    @property
    def n(self) -> int:
        return self.inner.n

    @property
    def k(self) -> int:
        return self.inner.k

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return proj_simplex(self.inner.evaluate(x))

    def as_function(self, name: str = "f_proj") -> VectorFunction:
        return VectorFunction(self.n, self.k, self.evaluate, FunctionForm.PROJECTED_POLY,
                              RangeRegion.SIMPLEX, self, name)

    def to_json(self) -> dict:
        return {"form": FunctionForm.PROJECTED_POLY.value, "inner": self.inner.to_json()}

    @classmethod
    def from_json(cls, data: dict) -> "ProjectedPolynomial":
        return cls(HermiteExpansion.from_json(data["inner"]))


@dataclass
class BoostResult:
    kappa: np.ndarray
    F_proj: VectorFunction
    trace: List[TraceRow]
    iterations: int
    beta: np.ndarray
    final_rho_sq: float
    tolerance: float
    indices: Optional[List[MultiIndex]] = None

    @property
    def kappa_norm_sq(self) -> float:
        return float(np.sum(self.kappa ** 2))

    @property
    def expansion(self) -> Optional[HermiteExpansion]:
        """kappa as a Hermite expansion when the basis is Hermite."""
        if self.indices is None:
            return None
        d = max((S.order for S in self.indices), default=0)
        return HermiteExpansion.from_matrix(self.F_proj.n, self.indices, self.kappa, d)

    def to_json(self) -> dict:
        out = {
            "iterations": self.iterations,
            "final_rho_sq": self.final_rho_sq,
            "kappa_norm_sq": self.kappa_norm_sq,
            "trace": [vars(r) for r in self.trace],
        }
        expansion = self.expansion
        if expansion is not None:
            out["function"] = ProjectedPolynomial(expansion).to_json()
        return out


def trace_csv(trace: Sequence[TraceRow], path: Optional[Union[str, Path]] = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "rho_sq", "psi", "alignment"])
    for r in trace:
        writer.writerow([r.t, format(r.rho_sq, ".17g"), format(r.psi, ".17g"), format(r.alignment, ".17g")])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


# ----- Core iteration -----

def _potential_on_nodes(w: np.ndarray, F: np.ndarray, F_t: np.ndarray, G_t: np.ndarray) -> float:
    return float(w @ np.einsum("ij,ij->i", F - F_t, F - 2.0 * G_t + F_t))


def potential(F: VectorFunction, F_t: VectorFunction, G_t: VectorFunction, estimator: Estimator) -> float:
    """Psi = E<F - F_t, F - 2 G_t + F_t> on the estimator's nodes."""
    x = estimator.nodes
    return _potential_on_nodes(estimator.weights, F(x), F_t(x), G_t(x))


def _gram_check(B: np.ndarray, estimator: Estimator) -> float:
    m = B.shape[1]
    gram = estimator.expect_products(B, B)
    deviation = np.abs(gram - np.eye(m))
    if estimator.kind == "quadrature":
        allowed = np.full_like(deviation, QUADRATURE_TOLERANCE)
    else:
        z = max(3.0, float(ndtri(1.0 - 0.0005 / (m * m))))
        allowed = z * estimator.stderr_products(B, B) + 1e-12
    worst = float(np.max(deviation - allowed))
    if worst > 0:
        raise NisimError(
            ErrorCode.NON_ORTHONORMAL_BASIS,
            f"Basis Gram matrix deviates from identity by {float(deviation.max()):.3g}",
            {"max_deviation": float(deviation.max())},
        )
    if np.any(np.abs(B[:, 0] - 1.0) > 1e-12):
        raise NisimError(ErrorCode.NON_ORTHONORMAL_BASIS, "First basis function must be the constant 1")
    return float(deviation.max())


def run_boost(
    F: VectorFunction,
    basis: Basis,
    delta: float,
    estimator: Estimator,
    indices: Optional[Sequence[MultiIndex]] = None,
) -> BoostResult:
    """Run the projection iteration until rho_t^2 <= delta."""
    if not delta > 0:
        raise NisimError(ErrorCode.INVALID_INPUT, f"delta must be > 0, got {delta}")
    x, w = estimator.nodes, estimator.weights
    B = basis.evaluate(x)
    _gram_check(B, estimator)

    Fv = F(x)
    if not np.all(in_simplex(Fv, 1e-9)):
        raise NisimError(ErrorCode.NOT_SIMPLEX_VALUED, "Boosting target must take values in the simplex")
    k, m = F.k, B.shape[1]
    monte_carlo = estimator.kind != "quadrature"
    tol = QUADRATURE_TOLERANCE if not monte_carlo else 0.0

    WB = B * w[:, None]
    beta = WB.T @ Fv
    kappa = np.zeros((m, k))
    kappa[0] = 1.0 / k
    budget = math.ceil(4.0 / delta)

    trace: List[TraceRow] = []
    t = 0
    while True:
        G = B @ kappa
        Ft = proj_simplex(G)
        beta_t = WB.T @ Ft
        diff = beta - beta_t
        rho_sq = float(np.sum(diff * diff))
        psi = _potential_on_nodes(w, Fv, Ft, G)
        alignment = float(w @ np.einsum("ij,ij->i", Fv - Ft, B @ diff))

        half_width = 0.0
        if monte_carlo:
            se = estimator.stderr_products(B, Fv - Ft)
            half_width = float(np.sum(2.0 * np.abs(diff) * 3.0 * se + (3.0 * se) ** 2))
            tol = max(tol, half_width)
        trace.append(TraceRow(t, rho_sq, psi, alignment))
        logger.debug(f"boost t={t}: rho^2={rho_sq:.6g} psi={psi:.6g}")

        if rho_sq - half_width <= delta:
            break
        if t + 1 > budget + 1:
            raise NisimError(
                ErrorCode.BUDGET_EXCEEDED,
                f"Boosting passed {budget + 1} iterations with rho^2={rho_sq:.4g} > {delta}",
                {"iterations": t, "rho_sq": rho_sq, "budget": budget},
            )
        kappa = kappa + 0.5 * diff
        t += 1

    F_proj = _projected_function(F, basis, kappa, indices)
    logger.info(f"boost finished: {t} iterations, rho^2={rho_sq:.4g}, |kappa|^2={float(np.sum(kappa ** 2)):.4g}")
    return BoostResult(kappa, F_proj, trace, t, beta, rho_sq, tol, list(indices) if indices is not None else None)


def _projected_function(F: VectorFunction, basis: Basis, kappa: np.ndarray,
                        indices: Optional[Sequence[MultiIndex]]) -> VectorFunction:
    if indices is not None:
        d = max((S.order for S in indices), default=0)
        inner = HermiteExpansion.from_matrix(F.n, indices, kappa, d)
        return ProjectedPolynomial(inner).as_function(f"Proj({F.name or 'F'})")
    frozen = kappa.copy()
    return VectorFunction(F.n, F.k, lambda z: proj_simplex(basis.evaluate(z) @ frozen),
                          FunctionForm.PROJECTED_POLY, RangeRegion.SIMPLEX, frozen, f"Proj({F.name or 'F'})")


# ----- Instantiations -----

def default_match_estimator(n: int, d: int, seed: Optional[int] = None, stream_offset: int = 0) -> Estimator:
    """Dense quadrature for small n, Monte Carlo otherwise."""
    if n in DENSE_NODES:
        return make_estimator(Quadrature(max(2 * d + 4, DENSE_NODES[n])), n, d)
    seed = settings.DEFAULT_SEED if seed is None else seed
    return make_estimator(MonteCarlo(settings.MC_SAMPLES, seed, STREAM_BOOST + stream_offset), n, d)


@dataclass
class MatchResult:
    f_proj: VectorFunction
    alpha: HermiteExpansion
    output_expansion: HermiteExpansion
    mismatch: float
    literal_mismatch: float
    boost: BoostResult
    degree: int

    @property
    def alpha_norm_sq(self) -> float:
        return self.alpha.weight()


def boost_match(f: VectorFunction, d: int, delta: float, estimator: Optional[Estimator] = None) -> MatchResult:
    """Proj(sum_{|S|<=d} alpha_S H_S) whose degree-d spectrum is within delta of f's.

    ``mismatch`` is sum_S ||f_hat(S) - beta_S(f_proj)||^2; ``literal_mismatch``
    compares beta_S(f_proj) with alpha_S instead.
    """
    basis = HermiteBasis(f.n, d)
    estimator = estimator or default_match_estimator(f.n, d)
    result = run_boost(f, basis, delta, estimator, basis.indices)

    B = basis_matrix(basis.indices, estimator.nodes)
    out_beta = (B * estimator.weights[:, None]).T @ result.F_proj(estimator.nodes)
    output_expansion = HermiteExpansion.from_matrix(f.n, basis.indices, out_beta, d)
    alpha = result.expansion
    mismatch = float(np.sum((result.beta - out_beta) ** 2))
    literal = float(np.sum((out_beta - result.kappa) ** 2))
    return MatchResult(result.F_proj, alpha, output_expansion, mismatch, literal, result, d)


@dataclass
class FsmResult:
    f_sm: VectorFunction
    match: MatchResult
    degree: int
    boost_delta: float
    variances: np.ndarray
    variance_bound: float
    mean_drift: float

    @property
    def inner(self) -> HermiteExpansion:
        return self.match.alpha


def build_fsm(f: VectorFunction, t: float, delta: float, k: Optional[int] = None,
              estimator: Optional[Estimator] = None) -> FsmResult:
    """Spectrum-matched projected polynomial at degree ceil((2/t) log(k^2/delta)).

    Boosting runs with mismatch delta^2 / k^4; the inner polynomials then have
    variance at most k^8 / delta^4.
    """
    k = k or f.k
    d = fsm_degree(t, k, delta)
    delta_b = delta * delta / k ** 4
    estimator = estimator or default_match_estimator(f.n, d)
    match = boost_match(f, d, delta_b, estimator)

    variances = match.alpha.variance()
    bound = k ** 8 / delta ** 4
    if np.any(variances > bound):
        logger.warning(f"build_fsm: inner variance {float(variances.max()):.4g} exceeds k^8/delta^4={bound:.4g}")
    x, w = estimator.nodes, estimator.weights
    mean_drift = float(np.sum(np.abs(w @ match.f_proj(x) - w @ f(x))))
    logger.info(f"build_fsm: degree {d}, boosting delta {delta_b:.3g}, mean drift {mean_drift:.3g}")
    return FsmResult(match.f_proj, match, d, delta_b, variances, bound, mean_drift)
