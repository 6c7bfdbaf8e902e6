"""Tests for the end-to-end smoothing pipeline."""

import math

import numpy as np
import pytest

from gauss_nisim.core.errors import ErrorCode, NisimError
from gauss_nisim.core.functions import vertex_function
from gauss_nisim.core.ppf import PpfMixture
from gauss_nisim.core.smoothing import smooth, smooth_one
from gauss_nisim.core.utils.jsonio import dumps

T = math.log(2)
DELTA = 0.2


def _halfspace():
    return vertex_function(1, 2, lambda x: np.where(x[:, 0] > 0, 0, 1), "halfspace")


@pytest.fixture(scope="module")
def quick_run():
    f = _halfspace()
    return smooth(f, f, T, DELTA, seed=11, samples=20_000, strict=False, cap=10_000, threads=2)


class TestSmooth:
    def test_structure(self, quick_run):
        report = quick_run.report
        assert report.m == 10
        assert report.d0 == math.ceil(2 / T * math.log(4 / DELTA))
        assert report.ppf_count_f == 20 and report.ppf_count_g == 20
        assert report.multiplier == 3.0
        assert report.samples == 20_000

    def test_range(self, quick_run):
        report = quick_run.report
        assert report.orthant_ok and report.linf_ok
        assert "orthant" not in report.violations and "linf" not in report.violations

    def test_capped_degree_is_reported(self, quick_run):
        report = quick_run.report
        assert report.degree_capped
        assert report.bernstein_degree_f <= 99

    def test_mixture_serializes(self, quick_run):
        data = quick_run.f1.to_json()
        restored = PpfMixture.from_json(data, quick_run.f1.maps)
        assert restored == quick_run.f1
        x = np.linspace(-2, 2, 11)[:, None]
        assert np.array_equal(restored.evaluate(x), quick_run.f1.evaluate(x))

    def test_deterministic_per_seed(self, quick_run):
        f = _halfspace()
        again = smooth(f, f, T, DELTA, seed=11, samples=20_000, strict=False, cap=10_000, threads=1)
        assert again.report.model_dump() == quick_run.report.model_dump()

    def test_f_side_does_not_depend_on_g(self, quick_run):
        f = _halfspace()
        other = vertex_function(1, 2, lambda x: np.where(x[:, 0] > 0.5, 1, 0), "shifted")
        run = smooth(f, other, T, DELTA, seed=11, samples=20_000, strict=False, cap=10_000, threads=2)
        assert dumps(run.f1.to_json()) == dumps(quick_run.f1.to_json())
        x = np.linspace(-3, 3, 25)[:, None]
        assert np.array_equal(run.f1.evaluate(x), quick_run.f1.evaluate(x))
        assert run.report.radius_f == quick_run.report.radius_f

    def test_delta_region_measured_for_both_sides(self, quick_run):
        report = quick_run.report
        assert 0.0 <= report.delta_region_prob_f <= 1.0
        assert 0.0 <= report.delta_region_prob_g <= 1.0
        assert report.delta_region_prob == max(report.delta_region_prob_f, report.delta_region_prob_g)
        assert report.delta_region_bound == pytest.approx(DELTA / 2)

    def test_dimension_mismatch(self, three_way):
        with pytest.raises(NisimError) as err:
            smooth(_halfspace(), three_way, T, DELTA, seed=0)
        assert err.value.code is ErrorCode.DIM_MISMATCH

    def test_smooth_one_needs_positive_time(self):
        with pytest.raises(NisimError) as err:
            smooth_one(_halfspace(), 0.0, DELTA, seed=0)
        assert err.value.code is ErrorCode.INVALID_INPUT


@pytest.mark.slow
def test_halfspace_report_passes():
    f = _halfspace()
    result = smooth(f, f, T, DELTA, seed=2024, samples=1_000_000)
    report = result.report
    assert report.passed
    assert report.multiplier <= 3
