"""Tests for the spectrum-matching projection iteration."""

import math

import numpy as np
import pytest

from gauss_nisim.core.boosting import (
    ProjectedPolynomial,
    TraceRow,
    boost_match,
    build_fsm,
    potential,
    run_boost,
    trace_csv,
)
from gauss_nisim.core.correlation import abs_difference, estimate_tables
from gauss_nisim.core.errors import ErrorCode, NisimError
from gauss_nisim.core.functions import VectorFunction, constant_function, vertex_function
from gauss_nisim.core.hermite import HermiteBasis, HermiteExpansion, MultiIndex
from gauss_nisim.core.sampling import MonteCarloEstimator, Quadrature, QuadratureEstimator, make_estimator


def _random_plurality(rng: np.random.Generator, n: int, k: int) -> VectorFunction:
    W = rng.normal(size=(k, n))
    b = rng.normal(scale=0.5, size=k)
    return vertex_function(n, k, lambda x: np.argmax(x @ W.T + b, axis=1), "random_plurality")


def _instances():
    rng = np.random.default_rng(2024)
    cases = []
    for i in range(20):
        n = int(rng.integers(1, 4))
        k = int(rng.integers(2, 5))
        d = int(rng.integers(1, 5)) if n < 3 else int(rng.integers(1, 3))
        delta = (0.2, 0.05)[i % 2]
        cases.append((n, k, d, delta, int(rng.integers(0, 2**31))))
    return cases


class _ListBasis:
    def __init__(self, *fns):
        self.fns = fns

    def __len__(self):
        return len(self.fns)

    def evaluate(self, x):
        return np.stack([fn(x) for fn in self.fns], axis=1)


class TestRunBoost:
    @pytest.mark.parametrize("n,k,d,delta,seed", _instances())
    def test_convergence_and_descent(self, n, k, d, delta, seed):
        F = _random_plurality(np.random.default_rng(seed), n, k)
        basis = HermiteBasis(n, d)
        estimator = make_estimator(Quadrature(), n, d)
        result = run_boost(F, basis, delta, estimator, basis.indices)

        assert result.iterations <= math.ceil(4 / delta)
        assert result.final_rho_sq <= delta
        assert result.kappa_norm_sq <= 16 / delta ** 2
        psis = [row.psi for row in result.trace]
        assert min(psis) >= -1e-6
        for before, after in zip(result.trace, result.trace[1:]):
            assert before.psi - after.psi >= before.rho_sq / 4 - 1e-6

    def test_final_mismatch_matches_independent_quadrature(self, halfspace):
        basis = HermiteBasis(1, 3)
        result = run_boost(halfspace, basis, 0.05, make_estimator(Quadrature(256), 1, 3), basis.indices)
        check = QuadratureEstimator(1, 300)
        B = basis.evaluate(check.nodes)
        beta = check.expect_products(B, halfspace(check.nodes))
        beta_out = check.expect_products(B, result.F_proj(check.nodes))
        # the two node sets disagree slightly on the discontinuity
        assert float(np.sum((beta - beta_out) ** 2)) <= 0.05 + 5e-3

    def test_alignment_equals_rho_sq(self, three_way):
        basis = HermiteBasis(2, 2)
        result = run_boost(three_way, basis, 0.05, make_estimator(Quadrature(48), 2, 2), basis.indices)
        assert len(result.trace) > 1
        for row in result.trace:
            assert row.alignment == pytest.approx(row.rho_sq, rel=1e-9, abs=1e-12)

    def test_constant_target_stops_immediately(self):
        F = constant_function(2, np.full(3, 1 / 3))
        basis = HermiteBasis(2, 2)
        result = run_boost(F, basis, 0.01, make_estimator(Quadrature(), 2, 2))
        assert result.iterations == 0
        assert result.kappa[0] == pytest.approx(np.full(3, 1 / 3))
        assert np.all(result.kappa[1:] == 0)

    def test_monte_carlo_stop_rule(self, halfspace):
        basis = HermiteBasis(1, 2)
        estimator = MonteCarloEstimator(1, 20_000, seed=3)
        result = run_boost(halfspace, basis, 0.05, estimator, basis.indices)
        assert result.tolerance > 0
        assert result.final_rho_sq <= 0.05 + result.tolerance

    def test_non_orthonormal_basis(self, halfspace):
        basis = _ListBasis(lambda x: np.ones(len(x)), lambda x: 2 * x[:, 0])
        with pytest.raises(NisimError) as err:
            run_boost(halfspace, basis, 0.1, QuadratureEstimator(1, 8))
        assert err.value.code is ErrorCode.NON_ORTHONORMAL_BASIS

    def test_first_basis_element_must_be_constant(self, halfspace):
        basis = _ListBasis(lambda x: x[:, 0], lambda x: np.ones(len(x)))
        with pytest.raises(NisimError) as err:
            run_boost(halfspace, basis, 0.1, QuadratureEstimator(1, 8))
        assert err.value.code is ErrorCode.NON_ORTHONORMAL_BASIS

    def test_target_outside_simplex(self):
        F = constant_function(1, np.array([2.0, -1.0]))
        with pytest.raises(NisimError) as err:
            run_boost(F, HermiteBasis(1, 1), 0.1, QuadratureEstimator(1, 6))
        assert err.value.code is ErrorCode.NOT_SIMPLEX_VALUED

    def test_invalid_delta(self, halfspace):
        with pytest.raises(NisimError) as err:
            run_boost(halfspace, HermiteBasis(1, 1), 0.0, QuadratureEstimator(1, 6))
        assert err.value.code is ErrorCode.INVALID_INPUT


class TestPotential:
    def test_zero_at_target(self, halfspace):
        estimator = QuadratureEstimator(1, 40)
        assert potential(halfspace, halfspace, halfspace, estimator) == pytest.approx(0.0, abs=1e-15)

    def test_initial_state_is_squared_distance(self, three_way):
        estimator = QuadratureEstimator(2, 30)
        start = constant_function(2, np.full(3, 1 / 3))
        psi = potential(three_way, start, start, estimator)
        x = estimator.nodes
        direct = float(estimator.weights @ np.sum((three_way(x) - start(x)) ** 2, axis=1))
        assert psi == pytest.approx(direct, rel=1e-12)
        assert 0.0 <= psi <= 2.0

    def test_two_term_decomposition(self, halfspace):
        estimator = QuadratureEstimator(1, 60)
        G = VectorFunction(1, 2, lambda x: np.stack([0.5 + x[:, 0], 0.5 - x[:, 0]], axis=1))
        inner = HermiteExpansion(1, 2, {MultiIndex(): np.array([0.5, 0.5]), MultiIndex.of(1): np.array([1.0, -1.0])})
        Ft = ProjectedPolynomial(inner).as_function()
        x, w = estimator.nodes, estimator.weights
        F, Fv, Gv = halfspace(x), Ft(x), G(x)
        expected = w @ np.sum((F - Fv) ** 2, axis=1) + 2 * (w @ np.sum((F - Fv) * (Fv - Gv), axis=1))
        assert potential(halfspace, Ft, G, estimator) == pytest.approx(expected, rel=1e-12)


class TestBoostMatch:
    def test_constant_vertex(self):
        f = constant_function(1, np.array([1.0, 0.0]))
        match = boost_match(f, 2, 0.01, QuadratureEstimator(1, 8))
        assert match.mismatch <= 0.01
        for S in match.alpha.indices():
            if S.order > 0:
                assert np.all(np.abs(match.alpha.coefficient(S)) <= 1e-12)
        values = match.f_proj(np.linspace(-3, 3, 7)[:, None])
        assert np.all(np.abs(values - [1.0, 0.0]) <= 0.1)

    def test_sign_split_in_two_dimensions(self, halfspace_2d):
        match = boost_match(halfspace_2d, 3, 0.05)
        assert match.degree == 3
        assert match.mismatch <= 0.05
        assert match.alpha_norm_sq <= 16 / 0.05 ** 2
        assert match.output_expansion.max_degree == 3

    def test_projected_polynomial_serializes(self, halfspace):
        match = boost_match(halfspace, 2, 0.1)
        data = match.boost.to_json()
        assert data["function"]["form"] == "projected_poly"
        restored = ProjectedPolynomial.from_json(data["function"]).as_function()
        x = np.linspace(-2, 2, 9)[:, None]
        assert np.array_equal(restored(x), match.f_proj(x))


class TestBuildFsm:
    def test_constant_function(self):
        f = constant_function(1, np.array([0.0, 1.0]))
        fsm = build_fsm(f, 1.0, 0.1)
        assert fsm.degree == 8
        assert fsm.boost_delta == pytest.approx(0.1 ** 2 / 16)
        assert fsm.mean_drift <= 0.1

    def test_halfspace(self, halfspace):
        fsm = build_fsm(halfspace, math.log(2), 0.1)
        assert fsm.degree == math.ceil(2 / math.log(2) * math.log(40))
        assert fsm.mean_drift <= 0.1
        assert np.all(fsm.variances <= fsm.variance_bound)


    def test_correlations_survive_smoothing(self, halfspace):
        t, delta = math.log(2), 0.1
        g = vertex_function(1, 2, lambda x: np.where(x[:, 0] > 0.3, 0, 1), "shifted")
        f_sm = build_fsm(halfspace, t, delta).f_sm
        g_sm = build_fsm(g, t, delta).f_sm
        before, after = estimate_tables([(halfspace, g), (f_sm, g_sm)], math.exp(-t), 200_000, seed=5)
        diff, se = abs_difference(before, after)
        assert float(diff.sum()) <= delta + 3 * se


def test_trace_csv(tmp_path):
    rows = [TraceRow(0, 0.5, 0.25, 0.5), TraceRow(1, 0.125, 0.1, 0.125)]
    path = tmp_path / "trace.csv"
    text = trace_csv(rows, path)
    assert text.splitlines()[0] == "t,rho_sq,psi,alignment"
    assert text.splitlines()[2] == "1,0.125,0.10000000000000001,0.125"
    assert path.read_text() == text
