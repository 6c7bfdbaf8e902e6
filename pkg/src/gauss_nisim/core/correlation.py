"""
Monte Carlo correlation tables and empirical checks.

Responsibilities:
- estimate_table(s): E[f_i(X) g_j(Y)] over rho-correlated pairs, batch-means
  standard errors, optional common random numbers across several pairs
- tv_distance between tables
- tail_check / sign_agree_check: measured rates against the hypercontractive bounds
- transfer_check: correlation drift after replacing f, g by low-degree matches
"""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .boosting import boost_match
from .errors import ErrorCode, NisimError
from .functions import VectorFunction
from .hermite import HermiteExpansion
from .polynomials import HermitePolynomial, Polynomial
from .sampling import GaussianPairSampler, batch_sizes, sample_pairs
from .spectral import noise_degree
from .utils.config import settings
from .utils.rng import STREAM_CHECKS, STREAM_TABLE, stream_generator

logger = logging.getLogger(__name__)

MIN_TABLE_SAMPLES = 100
VARIANCE_FLOOR = 1e-24

TableLike = Union["JointTable", np.ndarray]


# -------------------------------------------------------------------
# Tables
# -------------------------------------------------------------------
@dataclass(eq=False)
class JointTable:
    k: int
    entries: np.ndarray
    stderr: np.ndarray
    samples: int
    batch_means: Optional[np.ndarray] = field(default=None, repr=False)
    batch_weights: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def exact(cls, entries: np.ndarray) -> "JointTable":
        entries = np.asarray(entries, dtype=float)
        return cls(entries.shape[0], entries, np.zeros_like(entries), 0)

    @property
    def aggregate_stderr(self) -> float:
        return float(np.sqrt(np.sum(self.stderr ** 2)))

    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    def to_json(self) -> dict:
        return {"k": self.k, "samples": self.samples, "entries": self.entries.tolist(), "stderr": self.stderr.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "JointTable":
        entries = np.asarray(data["entries"], dtype=float)
        stderr = np.asarray(data.get("stderr", np.zeros_like(entries)), dtype=float)
        return cls(int(data.get("k", entries.shape[0])), entries, stderr, int(data.get("samples", 0)))

    def to_csv(self, path: Optional[Union[str, Path]] = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["i", "j", "entry", "stderr"])
        for i in range(self.k):
            for j in range(self.k):
                writer.writerow([i, j, format(self.entries[i, j], ".17g"), format(self.stderr[i, j], ".17g")])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def _as_entries(table: TableLike) -> np.ndarray:
    return table.entries if isinstance(table, JointTable) else np.asarray(table, dtype=float)


def tv_distance(A: TableLike, B: TableLike) -> float:
    """Half the l1 distance between two tables."""
    a, b = _as_entries(A), _as_entries(B)
    if a.shape != b.shape:
        raise NisimError(ErrorCode.DIM_MISMATCH, f"Table shapes differ: {a.shape} vs {b.shape}")
    return 0.5 * float(np.sum(np.abs(a - b)))


# -------------------------------------------------------------------
# Estimation
# -------------------------------------------------------------------
def _check_pair(f: VectorFunction, g: VectorFunction) -> None:
    if f.n != g.n or f.k != g.k:
        raise NisimError(
            ErrorCode.DIM_MISMATCH,
            f"Functions disagree on dimensions: f is {f.n}->{f.k}, g is {g.n}->{g.k}",
        )


def estimate_tables(
    pairs: Sequence[Tuple[VectorFunction, VectorFunction]],
    rho: float,
    samples: int,
    seed: int,
    batches: Optional[int] = None,
    threads: Optional[int] = None,
    stream_base: int = STREAM_TABLE,
) -> List[JointTable]:
    """Tables for several (f, g) pairs on one shared set of correlated samples."""
    if not pairs:
        return []
    for f, g in pairs:
        _check_pair(f, g)
        _check_pair(f, pairs[0][0])
    if samples < MIN_TABLE_SAMPLES:
        raise NisimError(ErrorCode.INVALID_SAMPLES, f"Tables need N >= {MIN_TABLE_SAMPLES}, got {samples}")
    n, k = pairs[0][0].n, pairs[0][0].k
    sampler = GaussianPairSampler(rho=rho, dim=n, seed=seed)
    sizes = batch_sizes(samples, batches or settings.BATCHES)

    def run_batch(b: int) -> np.ndarray:
        x, y = sample_pairs(sampler, sizes[b], stream_base + b)
        return np.stack([f(x).T @ g(y) / sizes[b] for f, g in pairs])

    workers = settings.resolved_threads(threads)
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="nisim_worker") as pool:
        means = np.stack(list(pool.map(run_batch, range(len(sizes)))))

    weights = np.asarray(sizes, dtype=float) / samples
    entries = np.tensordot(weights, means, axes=(0, 0))
    nb = len(sizes)
    if nb > 1:
        spread = np.sqrt(np.tensordot(weights, (means - entries) ** 2, axes=(0, 0)) * nb / (nb - 1))
        stderr = spread / math.sqrt(nb)
    else:
        stderr = np.zeros_like(entries)
    logger.debug(f"estimate_tables: {len(pairs)} pairs, N={samples}, {nb} batches, {workers} workers")
    return [JointTable(k, entries[p], stderr[p], samples, means[:, p], weights) for p in range(len(pairs))]


def estimate_table(
    f: VectorFunction,
    g: VectorFunction,
    rho: float,
    samples: int,
    seed: int,
    batches: Optional[int] = None,
    threads: Optional[int] = None,
) -> JointTable:
    """Entry (i, j) estimates E[f_i(X) g_j(Y)] = E[f_i P_t g_j] with e^{-t} = rho."""
    return estimate_tables([(f, g)], rho, samples, seed, batches, threads)[0]


def abs_difference(A: JointTable, B: JointTable) -> Tuple[np.ndarray, float]:
    """Entrywise |A - B| and the batch-means SE of their sum.

    Both tables must come from the same ``estimate_tables`` call.
    """
    diff = A.entries - B.entries
    if A.batch_means is None or B.batch_means is None or A.batch_means.shape != B.batch_means.shape:
        return np.abs(diff), float(np.sqrt(np.sum(A.stderr ** 2 + B.stderr ** 2)))
    signs = np.sign(diff)
    per_batch = np.einsum("bij,ij->b", A.batch_means - B.batch_means, signs)
    w = A.batch_weights
    nb = per_batch.shape[0]
    centre = float(w @ per_batch)
    se = math.sqrt(float(w @ (per_batch - centre) ** 2) * nb / max(nb - 1, 1) / nb)
    return np.abs(diff), se


# -------------------------------------------------------------------
# Inequality checks
# -------------------------------------------------------------------
@dataclass(frozen=True)
class TailRow:
    t: float
    rate: float
    stderr: float
    bound: float
    status: str


def hyper_bound(d: int, t: float) -> float:
    """d * exp(-t^{2/d})."""
    return d * math.exp(-(t ** (2.0 / d))) if d > 0 else 0.0


def tail_check(
    p: Polynomial,
    thresholds: Sequence[float],
    degree: Optional[int] = None,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> List[TailRow]:
    """Empirical Pr[|p - E p| >= t sd(p)] against d * exp(-t^{2/d}).

    Status is ``pass`` when the rate is within 3 SE of the bound, ``vacuous``
    when the bound is at least 1 and ``violated`` otherwise.
    """
    samples = samples or settings.MC_SAMPLES
    seed = settings.DEFAULT_SEED if seed is None else seed
    d = p.degree if degree is None else degree
    x = stream_generator(seed, STREAM_CHECKS + 2).standard_normal((samples, p.n))
    values, mean, var = p.evaluate(x), p.mean(), p.variance()
    if var <= VARIANCE_FLOOR:
        raise NisimError(ErrorCode.ZERO_VARIANCE, f"Polynomial variance {var:.3g} is zero")
    dev = np.abs(values - mean) / math.sqrt(var)

    rows: List[TailRow] = []
    for t in thresholds:
        hit = dev >= t
        rate = float(hit.mean())
        se = float(hit.std(ddof=1) / math.sqrt(samples))
        bound = hyper_bound(d, t)
        if bound >= 1.0:
            status = "vacuous"
        elif rate <= bound + 3.0 * se:
            status = "pass"
        else:
            status = "violated"
            logger.warning(f"tail_check: rate {rate:.3g} exceeds bound {bound:.3g} at t={t} (d={d})")
        rows.append(TailRow(float(t), rate, se, bound, status))
    return rows


@dataclass(frozen=True)
class SignAgreeReport:
    rate: float
    stderr: float
    tau: float
    variance_ratio: float
    allowed_ratio: float

    @property
    def tau_multiple(self) -> float:
        return self.rate / self.tau


def _difference_moments(a: Polynomial, b: Polynomial, x: np.ndarray) -> Tuple[float, float]:
    if isinstance(a, HermitePolynomial) and isinstance(b, HermitePolynomial):
        ea, eb = a.expansion, b.expansion
        keys = set(ea.coeffs) | set(eb.coeffs)
        diff = HermiteExpansion(ea.n, 1, {S: ea.coefficient(S) - eb.coefficient(S) for S in keys})
        return float(diff.mean()[0]), float(diff.variance()[0])
    values = a.evaluate(x) - b.evaluate(x)
    return float(values.mean()), float(values.var(ddof=1))


def sign_agree_check(
    a: Polynomial,
    b: Polynomial,
    tau: float,
    degree: Optional[int] = None,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
    mean_tolerance: float = 1e-9,
) -> SignAgreeReport:
    """Measured Pr[sign a != sign b] for polynomials with Var[a-b] <= (tau/d)^{3d} Var[a]."""
    samples = samples or settings.MC_SAMPLES
    seed = settings.DEFAULT_SEED if seed is None else seed
    d = max(a.degree, b.degree) if degree is None else degree
    x = stream_generator(seed, STREAM_CHECKS + 3).standard_normal((samples, a.n))
    mean_diff, var_diff = _difference_moments(a, b, x)
    var_a = a.variance()
    allowed = (tau / max(d, 1)) ** (3 * max(d, 1))
    ratio = var_diff / var_a if var_a > VARIANCE_FLOOR else math.inf
    if abs(mean_diff) > mean_tolerance or ratio > allowed:
        raise NisimError(
            ErrorCode.PRECONDITION_VIOLATED,
            f"sign_agree_check needs E[a-b]=0 and Var ratio <= {allowed:.3g}",
            {"mean_difference": mean_diff, "variance_ratio": ratio, "allowed_ratio": allowed},
        )
    disagree = np.sign(a.evaluate(x)) != np.sign(b.evaluate(x))
    rate = float(disagree.mean())
    se = float(disagree.std(ddof=1) / math.sqrt(samples))
    return SignAgreeReport(rate, se, tau, ratio, allowed)


# -------------------------------------------------------------------
# Correlation transfer
# -------------------------------------------------------------------
@dataclass
class TransferReport:
    degree: int
    spectral_gap_f: float
    spectral_gap_g: float
    spectral_bound: float
    drift: float
    drift_stderr: float
    delta: float

    @property
    def ok(self) -> bool:
        return self.drift <= self.delta + 3.0 * self.drift_stderr


def transfer_check(
    f: VectorFunction,
    g: VectorFunction,
    t: float,
    delta: float,
    samples: int,
    seed: int,
    threads: Optional[int] = None,
) -> TransferReport:
    """Match f, g at degree ceil((1/t) log(k^2/delta)) to within delta^2/k^4 and
    measure sum_{s1,s2} |E[f_s1 P_t g_s2] - E[f_low,s1 P_t g_low,s2]|."""
    _check_pair(f, g)
    k = f.k
    d1 = noise_degree(t, k, delta)
    bound = delta * delta / k ** 4
    f_low = boost_match(f, d1, bound)
    g_low = boost_match(g, d1, bound)
    before, after = estimate_tables([(f, g), (f_low.f_proj, g_low.f_proj)], math.exp(-t), samples, seed, threads=threads)
    diff, se = abs_difference(before, after)
    report = TransferReport(d1, f_low.mismatch, g_low.mismatch, bound, float(diff.sum()), se, delta)
    logger.info(f"transfer_check: d1={d1}, drift={report.drift:.4g} +/- {se:.2g} (delta={delta})")
    return report
