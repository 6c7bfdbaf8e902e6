"""Spectral operations: Hermite coefficient estimation, spectral weights, and the
Ornstein-Uhlenbeck noise operator P_t."""
from __future__ import annotations

import logging
import math
from typing import Optional, Tuple, Union

import numpy as np

from .errors import ErrorCode, NisimError
from .functions import FunctionForm, RangeRegion, VectorFunction
from .hermite import HermiteExpansion, basis_matrix, enumerate_indices
from .sampling import Method, MonteCarlo, Quadrature, make_estimator
from .utils.config import settings
from .utils.rng import STREAM_NOISE_INNER, stream_generator

logger = logging.getLogger(__name__)


def expand(f: VectorFunction, d: int, method: Method = Quadrature()) -> HermiteExpansion:
    """Estimate f_hat(S) = E[f(X) H_S(X)] for every |S| <= d.

    Monte Carlo estimates carry per-coefficient standard errors.
    """
    if d < 0:
        raise NisimError(ErrorCode.INVALID_INPUT, f"Degree must be >= 0, got {d}")
    estimator = make_estimator(method, f.n, d)
    indices = enumerate_indices(f.n, d)
    values = f(estimator.nodes)
    H = basis_matrix(indices, estimator.nodes)

    coeffs = estimator.expect_products(H, values)
    stderr = None
    if isinstance(method, MonteCarlo):
        se = estimator.stderr_products(H, values)
        stderr = {S: se[i] for i, S in enumerate(indices)}
    logger.debug(f"Expanded {f.name or f.form.value}: n={f.n}, k={f.k}, d={d}, {len(indices)} indices via {estimator.kind}")
    return HermiteExpansion(f.n, f.k, {S: coeffs[i] for i, S in enumerate(indices)}, d, stderr)


def spectral_weight(e: HermiteExpansion, d: int, total: Optional[float] = None) -> Tuple[float, Optional[float]]:
    """(W^{<=d}, W^{>d}); the high part is the Parseval residual and needs E||f||^2."""
    if d > e.max_degree:
        raise NisimError(
            ErrorCode.DEGREE_EXCEEDED,
            f"Requested degree {d} exceeds the expansion's max degree {e.max_degree}",
        )
    w_low = e.weight(d)
    w_high = None if total is None else float(total) - w_low
    return w_low, w_high


def noise_apply(
    target: Union[HermiteExpansion, VectorFunction],
    t: float,
    inner_samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> Union[HermiteExpansion, VectorFunction]:
    """Apply P_t.

    Expansions are scaled exactly by e^{-t|S|}. Functions become black boxes
    averaging f(e^{-t} x + sqrt(1 - e^{-2t}) y) over a fixed inner sample of y.
    """
    if t < 0:
        raise NisimError(ErrorCode.NEGATIVE_TIME, f"Noise time must be >= 0, got {t}")
    if isinstance(target, HermiteExpansion):
        return target.map_coefficients(lambda S, v: v * math.exp(-t * S.order))
    return _noise_function(target, t, inner_samples or settings.INNER_SAMPLES,
                           settings.DEFAULT_SEED if seed is None else seed)


def _noise_function(f: VectorFunction, t: float, inner: int, seed: int) -> VectorFunction:
    if t == 0:
        return f
    rho = math.exp(-t)
    sigma = math.sqrt(-math.expm1(-2.0 * t))
    y = stream_generator(seed, STREAM_NOISE_INNER).standard_normal((inner, f.n))

    def evaluate(x: np.ndarray) -> np.ndarray:
        out = np.empty((x.shape[0], f.k))
        chunk = max(1, 200_000 // inner)
        for start in range(0, x.shape[0], chunk):
            xs = x[start:start + chunk]
            pts = (rho * xs[:, None, :] + sigma * y[None, :, :]).reshape(-1, f.n)
            out[start:start + chunk] = f(pts).reshape(xs.shape[0], inner, f.k).mean(axis=1)
        return out

    region = RangeRegion.SIMPLEX if f.region in (RangeRegion.SIMPLEX, RangeRegion.VERTEX) else f.region
    return VectorFunction(f.n, f.k, evaluate, FunctionForm.BLACKBOX, region,
                          {"t": t, "inner_samples": inner, "seed": seed}, f"P_{t:g}({f.name})")


def fsm_degree(t: float, k: int, delta: float) -> int:
    """Boosting degree ceil((2/t) log(k^2/delta))."""
    _check_positive(t=t, delta=delta)
    return max(0, math.ceil((2.0 / t) * math.log(k * k / delta)))


def noise_degree(t: float, k: int, delta: float) -> int:
    """Degree beyond which P_t leaves at most delta/k^2 of correlation, ceil((1/t) log(k^2/delta))."""
    _check_positive(t=t, delta=delta)
    return max(0, math.ceil((1.0 / t) * math.log(k * k / delta)))


def _check_positive(**values: float) -> None:
    for name, value in values.items():
        if not value > 0:
            raise NisimError(ErrorCode.INVALID_INPUT, f"{name} must be > 0, got {value}")
