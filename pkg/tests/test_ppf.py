"""Tests for scalar polynomials, PPF evaluation, balancing and mixtures."""

import math

import numpy as np
import pytest
from scipy.special import ndtr

from gauss_nisim.core.errors import ErrorCode, NisimError
from gauss_nisim.core.polynomials import AffinePolynomial, HermitePolynomial, polynomial_from_json
from gauss_nisim.core.ppf import (
    PpfMixture,
    PpfSpec,
    balance_bound,
    balance_ppf,
    is_balanced,
    ppf_eval,
    threshold_mixture,
)


@pytest.fixture
def h1():
    return HermitePolynomial.from_terms(1, {(1,): 1.0})


class TestPolynomials:
    def test_moments_and_degree(self):
        p = HermitePolynomial.from_terms(2, {(): 0.5, (1, 1): 2.0, (0, 3): -1.0})
        assert p.degree == 3
        assert p.mean() == pytest.approx(0.5)
        assert p.variance() == pytest.approx(5.0)

    def test_affine_is_exact_on_hermite(self, h1):
        q = h1.affine(2.0, -1.0)
        assert isinstance(q, HermitePolynomial)
        assert q.mean() == -1.0 and q.variance() == 4.0

    def test_affine_wrappers_flatten(self, h1):
        inner = AffinePolynomial(h1, 2.0, 1.0)
        outer = AffinePolynomial(inner, 3.0, -0.5)
        assert outer.base is h1
        assert (outer.scale, outer.shift) == (6.0, 2.5)
        x = np.array([[0.2], [-1.0]])
        assert outer.evaluate(x) == pytest.approx(6.0 * x[:, 0] + 2.5)

    def test_json_round_trip(self, h1):
        p = AffinePolynomial(h1.affine(1.5, 0.25), 0.5, 0.125)
        assert polynomial_from_json(p.to_json()) == p

    def test_unknown_map_reference(self):
        with pytest.raises(NisimError) as err:
            polynomial_from_json({"type": "composed", "map": "abc", "coord": 0})
        assert err.value.code is ErrorCode.INVALID_INPUT


class TestPpfEval:
    def test_constant_positive(self):
        ppf = PpfSpec(HermitePolynomial.constant(2, 1.0), j=1, k=3)
        assert np.array_equal(ppf_eval(ppf, np.array([0.3, -0.2])), [0.0, 1.0, 0.0])

    def test_constant_negative(self):
        ppf = PpfSpec(HermitePolynomial.constant(2, -1.0), j=1, k=3)
        assert np.array_equal(ppf_eval(ppf, np.array([0.3, -0.2])), [0.0, 0.0, 0.0])

    def test_linear(self, h1):
        ppf = PpfSpec(h1, j=0, k=2)
        assert np.array_equal(ppf_eval(ppf, np.array([0.5])), [1.0, 0.0])
        assert np.array_equal(ppf_eval(ppf, np.array([[0.5], [-0.5], [0.0]])),
                              [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]])

    def test_coordinate_range(self, h1):
        with pytest.raises(ValueError):
            PpfSpec(h1, j=2, k=2)

    def test_dimension_mismatch(self, h1):
        with pytest.raises(NisimError) as err:
            ppf_eval(PpfSpec(h1, 0, 2), np.zeros((3, 2)))
        assert err.value.code is ErrorCode.DIM_MISMATCH


class TestBalance:
    def test_pure_rescale(self, h1):
        ppf = PpfSpec(h1.affine(2.0, 0.0), 0, 2)
        out = balance_ppf(ppf, 0.1)
        assert out.poly.variance() == pytest.approx(1.0)
        assert out.poly.mean() == 0.0
        assert out.balance == (1, 0.1)
        x = np.random.default_rng(0).normal(size=(1_000, 1))
        assert np.array_equal(ppf_eval(out, x), ppf_eval(ppf, x))

    def test_already_balanced_is_unchanged(self, h1):
        ppf = PpfSpec(h1.affine(1.0, 0.5), 0, 2)
        assert is_balanced(ppf, 1, 0.1)
        out = balance_ppf(ppf, 0.1)
        assert out.poly is ppf.poly
        assert balance_ppf(out, 0.1) == out

    def test_mean_clamped(self, h1):
        ppf = PpfSpec(h1.affine(1.0, 100.0), 0, 2)
        out = balance_ppf(ppf, 0.01, degree=1)
        bound = math.sqrt(math.log(100.0))
        assert bound == pytest.approx(2.146, abs=1e-3)
        assert out.poly.mean() == pytest.approx(bound, rel=1e-12)
        assert out.poly.variance() == pytest.approx(1.0, rel=1e-12)

        # sign flips happen exactly where x < -bound
        N = 1_000_000
        x = np.random.default_rng(1).normal(size=(N, 1))
        flips = np.any(ppf_eval(out, x) != ppf_eval(ppf, x), axis=1).mean()
        expected = ndtr(-bound)
        assert flips == pytest.approx(expected, abs=3 * math.sqrt(expected * (1 - expected) / N))

    def test_zero_variance(self):
        with pytest.raises(NisimError) as err:
            balance_ppf(PpfSpec(HermitePolynomial.constant(1, 2.0), 0, 2), 0.1)
        assert err.value.code is ErrorCode.ZERO_VARIANCE

    def test_bound_formula(self):
        assert balance_bound(2, 0.1) == pytest.approx(2 * math.log(10.0))
        assert balance_bound(0, 0.1) == 0.0
        assert balance_bound(2000, 1e-300) == math.inf
        with pytest.raises(NisimError):
            balance_bound(2, 1.5)


class TestMixture:
    def _mixture(self):
        polys = [HermitePolynomial.from_terms(2, {(1,): 1.0, (): 0.6}),
                 HermitePolynomial.from_terms(2, {(0, 1): 1.0, (): 0.4})]
        return threshold_mixture(polys, eta=0.25, delta=0.25)

    def test_structure(self):
        mix = self._mixture()
        assert mix.m == 4
        assert mix.ppf_count == 8
        assert mix.balanced_count == 8
        assert all(w == 0.25 for w, _ in mix.terms)

    def test_range_in_unit_orthant(self):
        mix = self._mixture()
        values = mix.as_function()(np.random.default_rng(2).normal(size=(2_000, 2)))
        assert values.min() >= 0.0 and values.max() <= 1.0

    def test_counts_thresholds(self):
        # with unit-variance linear parts the balanced terms keep their signs
        mix = self._mixture()
        x = np.array([[5.0, -5.0]])
        np.testing.assert_allclose(mix.evaluate(x), [[1.0, 0.0]])

    def test_constant_terms_left_unbalanced(self):
        mix = threshold_mixture([HermitePolynomial.constant(1, 0.3), HermitePolynomial.constant(1, 0.7)],
                                eta=0.5, delta=0.5)
        assert mix.balanced_count == 0
        # thresholds 0 and 0.5: 0.3 passes one, 0.7 passes both
        np.testing.assert_allclose(mix.evaluate(np.zeros((1, 1))), [[0.5, 1.0]])

    def test_json_round_trip(self):
        mix = self._mixture()
        assert PpfMixture.from_json(mix.to_json()) == mix
