"""
End-to-end smoothing of [k]-valued functions into PPF mixtures.

Per function h:
1) build_fsm      - spectrum-matched projected polynomial Proj(p) at degree d_0
2) smooth_poly    - Proj replaced by a Bernstein approximant, giving p' = BP o p
3) threshold_mixture - h_1 = sum_s sum_{j<m} (1/m) PPF_{p'_s - eta j, s}, balanced terms

The construction for f never reads g; the pair is only joined in the report.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from .bernstein import RadiusMode, SmoothPolyResult, smooth_poly
from .boosting import FsmResult, build_fsm, default_match_estimator
from .correlation import abs_difference, estimate_tables
from .errors import ErrorCode, NisimError
from .functions import VectorFunction
from .polynomials import ComposedPolynomial
from .ppf import PpfMixture, threshold_mixture
from .simplex import simplex_l1_distance
from .spectral import fsm_degree
from .utils.config import settings
from .utils.rng import STREAM_SMOOTH_REPORT, stream_generator

logger = logging.getLogger(__name__)


class SmoothingReport(BaseModel):
    """Measured smoothing guarantees for one (f, g) pair; every estimate carries its SE."""
    multiplier: float
    k: int
    delta: float
    t: float
    samples: int

    orthant_ok: bool
    linf_ok: bool
    delta_region_prob: float
    delta_region_stderr: float
    delta_region_prob_f: float
    delta_region_stderr_f: float
    delta_region_prob_g: float
    delta_region_stderr_g: float
    delta_region_bound: float
    mean_drift_f: float
    mean_drift_f_stderr: float
    mean_drift_g: float
    mean_drift_g_stderr: float
    mean_drift_bound: float
    corr_drift: List[List[float]]
    corr_drift_stderr: List[List[float]]
    corr_drift_total: float
    corr_drift_total_stderr: float
    corr_drift_bound: float
    ppf_count_f: int
    ppf_count_g: int
    m: int
    d0: int
    balanced_f: int
    balanced_g: int
    tail_prob_f: float
    tail_prob_g: float
    radius_f: float
    radius_g: float
    bernstein_degree_f: int
    bernstein_degree_g: int
    degree_capped: bool
    violations: List[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


@dataclass
class SmoothedFunction:
    mixture: PpfMixture
    fsm: FsmResult
    smooth: SmoothPolyResult

    @property
    def function(self) -> VectorFunction:
        return self.mixture.as_function("f_1")


@dataclass
class SmoothingResult:
    f1: PpfMixture
    g1: PpfMixture
    report: SmoothingReport
    f_parts: SmoothedFunction
    g_parts: SmoothedFunction


def smooth_one(
    h: VectorFunction,
    t: float,
    delta: float,
    seed: int,
    slot: int = 0,
    radius_mode: RadiusMode = RadiusMode.EMPIRICAL,
    samples: Optional[int] = None,
    cap: Optional[int] = None,
) -> SmoothedFunction:
    """Smooth a single vertex-valued function; ``slot`` selects its RNG streams."""
    if not (t > 0 and delta > 0):
        raise NisimError(ErrorCode.INVALID_INPUT, f"t and delta must be > 0, got t={t}, delta={delta}")
    k = h.k
    d0 = fsm_degree(t, k, delta)
    estimator = default_match_estimator(h.n, d0, seed, stream_offset=slot)
    fsm = build_fsm(h, t, delta, k, estimator)
    sp = smooth_poly(fsm.inner, delta, radius_mode, samples, seed, cap, stream_offset=slot)

    eta = delta / k
    m = math.ceil(k / delta - 1e-9)
    polys = [ComposedPolynomial(sp.poly_map, s) for s in range(k)]
    mixture = threshold_mixture(polys, eta, delta, m, balance_degree=d0, maps={sp.poly_map.map_id: sp.poly_map})
    logger.info(f"smooth_one[{slot}]: d0={d0}, m={m}, {mixture.ppf_count} PPFs ({mixture.balanced_count} balanced)")
    return SmoothedFunction(mixture, fsm, sp)


def smooth_family(
    fs: Sequence[VectorFunction],
    t: float,
    delta: float,
    seed: int,
    threads: Optional[int] = None,
    **kwargs,
) -> List[SmoothedFunction]:
    """Smooth each function independently on its own stream slot."""
    workers = min(len(fs), settings.resolved_threads(threads)) or 1
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="nisim_worker") as pool:
        futures = [pool.submit(smooth_one, h, t, delta, seed, slot, **kwargs) for slot, h in enumerate(fs)]
        return [fut.result() for fut in futures]


def _delta_region(values: np.ndarray, radius: float) -> tuple:
    outside = simplex_l1_distance(values) > radius
    return float(outside.mean()), float(outside.std(ddof=1) / math.sqrt(values.shape[0]))


def _mean_drift(h: VectorFunction, h1: VectorFunction, x: np.ndarray) -> tuple:
    diff = h1(x) - h(x)
    mean = diff.mean(axis=0)
    signed = diff @ np.sign(mean)
    return float(np.abs(mean).sum()), float(signed.std(ddof=1) / math.sqrt(x.shape[0]))


def smooth(
    f: VectorFunction,
    g: VectorFunction,
    t: float,
    delta: float,
    seed: int,
    samples: Optional[int] = None,
    strict: bool = True,
    radius_mode: RadiusMode = RadiusMode.EMPIRICAL,
    cap: Optional[int] = None,
    threads: Optional[int] = None,
    multiplier: Optional[float] = None,
) -> SmoothingResult:
    """Smooth f and g into PPF mixtures and measure every item of the report.

    Raises REPORT_VIOLATION (with the report attached) when ``strict`` and any
    item exceeds its bound by more than 3 standard errors.
    """
    if f.n != g.n or f.k != g.k:
        raise NisimError(ErrorCode.DIM_MISMATCH, "smooth needs f and g with equal n and k")
    c = settings.REPORT_MULTIPLIER if multiplier is None else multiplier
    samples = samples or settings.MC_SAMPLES
    k = f.k
    logger.info(f"smooth: n={f.n}, k={k}, t={t}, delta={delta}, seed={seed}, multiplier={c}")

    parts_f, parts_g = smooth_family(
        [f, g], t, delta, seed, threads, radius_mode=radius_mode, samples=samples, cap=cap,
    )
    f1, g1 = parts_f.mixture.as_function("f_1"), parts_g.mixture.as_function("g_1")

    x = stream_generator(seed, STREAM_SMOOTH_REPORT).standard_normal((samples, f.n))
    v_f, v_g = f1(x), g1(x)
    orthant_ok = bool(np.all(v_f >= 0) and np.all(v_g >= 0))
    linf_ok = bool(np.all(v_f <= 1 + 1e-12) and np.all(v_g <= 1 + 1e-12))

    region_f, region_f_se = _delta_region(v_f, k * delta / 2.0)
    region_g, region_g_se = _delta_region(v_g, k * delta / 2.0)
    region_prob, region_se = max((region_f, region_f_se), (region_g, region_g_se))

    drift_f, drift_f_se = _mean_drift(f, f1, x)
    drift_g, drift_g_se = _mean_drift(g, g1, x)

    before, after = estimate_tables([(f, g), (f1, g1)], math.exp(-t), samples, seed, threads=threads)
    corr_abs, corr_total_se = abs_difference(before, after)
    corr_se = np.sqrt(before.stderr ** 2 + after.stderr ** 2)

    bound = c * k * delta
    violations: List[str] = []
    if not orthant_ok:
        violations.append("orthant")
    if not linf_ok:
        violations.append("linf")
    if region_f > delta / 2.0 + 3.0 * region_f_se:
        violations.append("delta_region_f")
    if region_g > delta / 2.0 + 3.0 * region_g_se:
        violations.append("delta_region_g")
    if drift_f > bound + 3.0 * drift_f_se:
        violations.append("mean_drift_f")
    if drift_g > bound + 3.0 * drift_g_se:
        violations.append("mean_drift_g")
    if np.any(corr_abs > bound + 3.0 * corr_se):
        violations.append("corr_drift")

    report = SmoothingReport(
        multiplier=c, k=k, delta=delta, t=t, samples=samples,
        orthant_ok=orthant_ok, linf_ok=linf_ok,
        delta_region_prob=region_prob, delta_region_stderr=region_se,
        delta_region_prob_f=region_f, delta_region_stderr_f=region_f_se,
        delta_region_prob_g=region_g, delta_region_stderr_g=region_g_se, delta_region_bound=delta / 2.0,
        mean_drift_f=drift_f, mean_drift_f_stderr=drift_f_se,
        mean_drift_g=drift_g, mean_drift_g_stderr=drift_g_se, mean_drift_bound=bound,
        corr_drift=corr_abs.tolist(), corr_drift_stderr=corr_se.tolist(),
        corr_drift_total=float(corr_abs.sum()), corr_drift_total_stderr=corr_total_se, corr_drift_bound=bound,
        ppf_count_f=parts_f.mixture.ppf_count, ppf_count_g=parts_g.mixture.ppf_count,
        m=parts_f.mixture.m, d0=parts_f.fsm.degree,
        balanced_f=parts_f.mixture.balanced_count, balanced_g=parts_g.mixture.balanced_count,
        tail_prob_f=parts_f.smooth.tail_prob, tail_prob_g=parts_g.smooth.tail_prob,
        radius_f=parts_f.smooth.radius, radius_g=parts_g.smooth.radius,
        bernstein_degree_f=parts_f.smooth.degree, bernstein_degree_g=parts_g.smooth.degree,
        degree_capped=parts_f.smooth.capped or parts_g.smooth.capped,
        violations=violations,
    )
    if violations:
        logger.error(f"smooth: report items out of bounds: {', '.join(violations)}")
        if strict:
            raise NisimError(ErrorCode.REPORT_VIOLATION, f"Items out of bounds: {', '.join(violations)}",
                             {"report": report.model_dump()})
    return SmoothingResult(parts_f.mixture, parts_g.mixture, report, parts_f, parts_g)
