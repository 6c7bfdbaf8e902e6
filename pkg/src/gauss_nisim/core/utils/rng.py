"""Stream-keyed counter-based generators.

Every stochastic stage draws from ``stream_generator(seed, stream)`` so that
parallel batches are reproducible from ``(seed, stream-id)`` alone.
"""
from __future__ import annotations

import numpy as np

# Stream-id blocks; batch b of a stage uses ``base + b``.
STREAM_PAIRS = 0
STREAM_EXPAND = 1_000
STREAM_NOISE_INNER = 2_000
STREAM_BOOST = 3_000
STREAM_SMOOTH_RADIUS = 4_000
STREAM_SMOOTH_REPORT = 5_000
STREAM_GRID_ROUND = 6_000
STREAM_CHECKS = 7_000
STREAM_TABLE = 10_000


def stream_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator for one stream of one seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def stream_layout() -> dict:
    """Named stream-id blocks, printed by the CLI so runs are replayable."""
    return {
        "pairs": STREAM_PAIRS,
        "expand": STREAM_EXPAND,
        "noise_inner": STREAM_NOISE_INNER,
        "boost": STREAM_BOOST,
        "smooth_radius": STREAM_SMOOTH_RADIUS,
        "smooth_report": STREAM_SMOOTH_REPORT,
        "grid_round": STREAM_GRID_ROUND,
        "checks": STREAM_CHECKS,
        "table": STREAM_TABLE,
    }
