"""Tests for correlated pair sampling and the shared estimators."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from gauss_nisim.core.errors import ErrorCode, NisimError
from gauss_nisim.core.sampling import (
    GaussianPairSampler,
    MonteCarlo,
    MonteCarloEstimator,
    Quadrature,
    QuadratureEstimator,
    batch_sizes,
    make_estimator,
    sample_pairs,
)
from gauss_nisim.core.utils.rng import stream_generator, stream_layout


class TestPairs:
    def test_perfect_correlation(self):
        x, y = sample_pairs(GaussianPairSampler(rho=1.0, dim=3, seed=42), 100)
        assert np.array_equal(x, y)

    def test_independence(self):
        N = 50_000
        x, y = sample_pairs(GaussianPairSampler(rho=0.0, dim=1, seed=1), N)
        assert abs(np.corrcoef(x[:, 0], y[:, 0])[0, 1]) <= 4 / math.sqrt(N)

    def test_half_correlation(self):
        N = 200_000
        x, y = sample_pairs(GaussianPairSampler(rho=0.5, dim=2, seed=2), N)
        for i in range(2):
            assert np.corrcoef(x[:, i], y[:, i])[0, 1] == pytest.approx(0.5, abs=3 * 0.75 / math.sqrt(N) + 1e-3)

    def test_from_time(self):
        assert GaussianPairSampler.from_time(math.log(2), 1, 0).rho == pytest.approx(0.5)
        with pytest.raises(NisimError) as err:
            GaussianPairSampler.from_time(-1.0, 1, 0)
        assert err.value.code is ErrorCode.NEGATIVE_TIME

    def test_deterministic_per_seed_and_stream(self):
        s = GaussianPairSampler(rho=0.3, dim=2, seed=9)
        a, _ = sample_pairs(s, 10, stream=4)
        b, _ = sample_pairs(s, 10, stream=4)
        c, _ = sample_pairs(s, 10, stream=5)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_invalid_rho_rejected(self):
        with pytest.raises(ValidationError):
            GaussianPairSampler(rho=1.5, dim=1, seed=0)

    def test_zero_count(self):
        with pytest.raises(NisimError) as err:
            sample_pairs(GaussianPairSampler(rho=0.1, dim=1, seed=0), 0)
        assert err.value.code is ErrorCode.INVALID_SAMPLES

    def test_batches_cover_count(self):
        assert batch_sizes(10, 3) == [4, 3, 3]
        assert batch_sizes(2, 5) == [1, 1]
        assert sum(batch_sizes(1_001, 10)) == 1_001


class TestEstimators:
    def test_quadrature_weights_sum_to_one(self):
        est = QuadratureEstimator(2, 6)
        assert est.size == 36
        assert est.weights.sum() == pytest.approx(1.0, abs=1e-14)
        assert est.expect(est.nodes[:, 0] ** 2) == pytest.approx(1.0, abs=1e-12)

    def test_default_nodes_per_axis(self):
        est = make_estimator(Quadrature(), 1, 3)
        assert est.size == 10

    def test_monte_carlo_stderr(self):
        est = make_estimator(MonteCarlo(10_000, seed=4), 1, 0)
        values = est.nodes[:, :1]
        assert est.stderr(values)[0] == pytest.approx(0.01, rel=0.05)

    def test_product_stderr_matches_direct(self):
        est = MonteCarloEstimator(1, 5_000, seed=8)
        A = np.hstack([np.ones((5_000, 1)), est.nodes])
        C = (est.nodes > 0).astype(float)
        direct = np.array([[est.stderr((A[:, i] * C[:, 0])[:, None])[0]] for i in range(2)])
        assert est.stderr_products(A, C) == pytest.approx(direct, rel=1e-8)


def test_stream_layout_is_disjoint():
    layout = stream_layout()
    assert len(set(layout.values())) == len(layout)
    a = stream_generator(1, layout["boost"]).standard_normal(3)
    b = stream_generator(1, layout["boost"]).standard_normal(3)
    assert np.array_equal(a, b)
