import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from mixgm.core import (
    CHUNK_ROWS, ParamSpace, compute_penalty_weights, discrete_conditional, gaussian_conditional,
    neg_pseudo_loglik, penalty_value, pseudo_loglik_gradient,
)
from mixgm.data import Dataset, Variable, VariableSchema
from mixgm.errors import DataError
from mixgm.simulate import synthetic_schema
from mixgm.theta import Theta

from oracles import direct_objective, fd_gradient, random_dataset, random_theta, relative_error


def _objective_of(space, ds):
    return lambda v: neg_pseudo_loglik(space.unpack(v), ds)


class TestGaussianConditional:
    def test_unit_diagonal_only(self):
        t = Theta.zeros(synthetic_schema(2, 1, [2]))
        assert gaussian_conditional(t, np.array([0.7, -1.2]), np.array([1]), 0) == (0.0, 1.0)

    def test_alpha_over_beta(self):
        t = Theta.zeros(synthetic_schema(2, 0, []))
        t.beta[0, 0], t.alpha[0] = 2.0, 4.0
        assert gaussian_conditional(t, np.array([0.0, 3.0]), np.zeros(0, int), 0)[0] == 2.0

    def test_neighbor_substitution(self):
        t = Theta.zeros(synthetic_schema(2, 0, []))
        t.beta[0, 1] = t.beta[1, 0] = -0.5
        mean, prec = gaussian_conditional(t, np.array([0.0, 1.0]), np.zeros(0, int), 0)
        assert mean == 0.5 and prec == 1.0

    def test_nonpositive_diagonal(self):
        t = Theta.zeros(synthetic_schema(2, 0, []))
        t.beta[1, 1] = 0.0
        with pytest.raises(DataError):
            gaussian_conditional(t, np.zeros(2), np.zeros(0, int), 1)


class TestDiscreteConditional:
    def test_uniform(self):
        t = Theta.zeros(synthetic_schema(1, 1, [3]))
        np.testing.assert_allclose(discrete_conditional(t, np.array([0.4]), np.array([2]), 0), [1 / 3] * 3,
                                   atol=1e-15)

    def test_hand_softmax(self):
        t = Theta.zeros(synthetic_schema(1, 1, [2]))
        t.phi[0, 0] = math.log(2)
        np.testing.assert_allclose(discrete_conditional(t, np.array([0.0]), np.array([0]), 0), [2 / 3, 1 / 3],
                                   atol=1e-15)

    def test_shift_invariance(self, small_schema):
        rng = np.random.default_rng(0)
        t = random_theta(small_schema, rng)
        x, y = rng.normal(size=3), np.array([1, 2])
        before = discrete_conditional(t, x, y, 1)
        t.phi[np.arange(2, 5), np.arange(2, 5)] += 17.5
        np.testing.assert_allclose(discrete_conditional(t, x, y, 1), before, atol=1e-14)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_probability_vector(self, seed):
        rng = np.random.default_rng(seed)
        schema = synthetic_schema(2, 3, [2, 4, 3])
        t = random_theta(schema, rng, scale=3.0)
        x = rng.normal(size=2) * 5
        y = np.array([rng.integers(0, L) for L in schema.n_levels])
        for r in range(3):
            pr = discrete_conditional(t, x, y, r)
            assert abs(pr.sum() - 1) < 1e-12 and np.all((pr >= 0) & (pr <= 1))


class TestObjective:
    def test_gaussian_closed_form(self):
        # two independent standard normal nodes, one row at the origin
        schema = synthetic_schema(2, 0, [])
        ds = Dataset(schema, np.zeros((1, 2)), np.zeros((1, 0), int))
        assert neg_pseudo_loglik(Theta.zeros(schema), ds) == pytest.approx(2 * 0.5 * math.log(2 * math.pi), abs=1e-15)

    def test_uniform_binary(self):
        schema = synthetic_schema(0, 2, [2, 2])
        ds = Dataset(schema, np.zeros((3, 0)), np.array([[0, 1], [1, 1], [0, 0]]))
        assert neg_pseudo_loglik(Theta.zeros(schema), ds) == pytest.approx(2 * math.log(2), abs=1e-15)

    def test_mixed_node_terms_add(self):
        schema = synthetic_schema(1, 1, [2])
        ds = Dataset(schema, np.zeros((1, 1)), np.array([[1]]))
        assert neg_pseudo_loglik(Theta.zeros(schema), ds) == pytest.approx(0.9189385332046727 + 0.6931471805599453)

    def test_doubling_dataset(self, small_schema):
        rng = np.random.default_rng(1)
        t, ds = random_theta(small_schema, rng), random_dataset(small_schema, 40, rng)
        assert neg_pseudo_loglik(t, ds.concat(ds)) == pytest.approx(neg_pseudo_loglik(t, ds), rel=1e-14)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_direct_formula(self, seed):
        rng = np.random.default_rng(seed)
        schema = synthetic_schema(3, 3, [2, 3, 4])
        t, ds = random_theta(schema, rng), random_dataset(schema, 30, rng)
        assert neg_pseudo_loglik(t, ds) == pytest.approx(direct_objective(t, ds), rel=1e-12)

    def test_dimension_mismatch(self, small_schema):
        rng = np.random.default_rng(0)
        other = synthetic_schema(3, 2, [2, 2])
        with pytest.raises(DataError, match="dimension mismatch"):
            neg_pseudo_loglik(Theta.zeros(other), random_dataset(small_schema, 5, rng))
        with pytest.raises(DataError, match="dimension mismatch"):
            pseudo_loglik_gradient(Theta.zeros(other), random_dataset(small_schema, 5, rng))

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(7)
        schema = synthetic_schema(2, 2, [3, 2])
        t, ds = random_theta(schema, rng), random_dataset(schema, 60, rng)
        perm = np.array([2, 0, 1])  # new level k is old level perm[k]
        v = schema.discrete[0]
        relabeled = VariableSchema((*schema.continuous, Variable(v.name, "discrete", tuple(v.levels[k] for k in perm),
                                                                 v.baseline), schema.discrete[1]))
        cols = np.r_[perm, 3, 4]
        t2 = Theta(relabeled, t.beta, t.alpha, t.rho[:, cols], t.phi[np.ix_(cols, cols)])
        inv = np.argsort(perm)
        D2 = np.c_[inv[ds.discrete[:, 0]], ds.discrete[:, 1]]
        ds2 = Dataset(relabeled, ds.continuous, D2)
        assert neg_pseudo_loglik(t2, ds2) == pytest.approx(neg_pseudo_loglik(t, ds), abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.99))
    def test_convex_along_segments(self, seed, lam_t):
        rng = np.random.default_rng(seed)
        schema = synthetic_schema(2, 2, [2, 3])
        ds = random_dataset(schema, 25, rng)
        w = compute_penalty_weights(ds)
        a, b = random_theta(schema, rng, 1.0), random_theta(schema, rng, 1.0)
        b.beta[np.diag_indices(2)] = a.beta[np.diag_indices(2)]  # fixed diagonal
        space = ParamSpace(schema)
        va, vb = space.pack(a), space.pack(b)

        def f(v):
            th = space.unpack(v)
            return neg_pseudo_loglik(th, ds) + penalty_value(th, w, 0.3)

        mid = f(lam_t * va + (1 - lam_t) * vb)
        assert mid <= lam_t * f(va) + (1 - lam_t) * f(vb) + 1e-9


class TestGradient:
    @pytest.mark.parametrize("seed", range(10))
    def test_finite_differences(self, seed, small_schema):
        rng = np.random.default_rng(seed)
        t, ds = random_theta(small_schema, rng), random_dataset(small_schema, 50, rng)
        space = ParamSpace(small_schema)
        _, g = pseudo_loglik_gradient(t, ds)
        fd = fd_gradient(_objective_of(space, ds), space.pack(t))
        assert relative_error(space.pack(g), fd) < 1e-5

    def test_value_agrees_with_objective(self, small_schema):
        rng = np.random.default_rng(3)
        t, ds = random_theta(small_schema, rng), random_dataset(small_schema, 50, rng)
        assert pseudo_loglik_gradient(t, ds)[0] == neg_pseudo_loglik(t, ds)

    def test_symmetric_containers(self, small_schema):
        rng = np.random.default_rng(5)
        _, g = pseudo_loglik_gradient(random_theta(small_schema, rng), random_dataset(small_schema, 30, rng))
        np.testing.assert_array_equal(g.beta, g.beta.T)
        np.testing.assert_array_equal(g.phi, g.phi.T)
        # within-variable blocks hold only node potentials
        assert g.phi[2, 3] == 0.0 and g.phi[0, 1] == 0.0

    def test_alpha_zero_on_centered_data(self):
        rng = np.random.default_rng(2)
        schema = synthetic_schema(3, 0, [])
        X = rng.normal(size=(80, 3))
        ds = Dataset(schema, X - X.mean(axis=0), np.zeros((80, 0), int))
        t = Theta.zeros(schema)
        _, g = pseudo_loglik_gradient(t, ds)
        np.testing.assert_allclose(g.alpha, 0.0, atol=1e-15)
        space = ParamSpace(schema)
        fd = fd_gradient(_objective_of(space, ds), space.pack(t))[space.slices["alpha"]]
        np.testing.assert_allclose(fd, 0.0, atol=1e-9)

    def test_vanishes_at_unpenalized_optimum(self):
        rng = np.random.default_rng(11)
        schema = synthetic_schema(2, 1, [2])
        ds = random_dataset(schema, 100, rng)
        space = ParamSpace(schema)

        def fg(v):
            th = space.unpack(v)
            if np.any(np.diag(th.beta) <= 0):
                return np.inf, np.zeros_like(v)
            f, g = pseudo_loglik_gradient(th, ds)
            return f, space.pack(g)

        res = minimize(fg, space.pack(Theta.zeros(schema)), jac=True, method="BFGS",
                       options={"gtol": 1e-10, "maxiter": 10_000})
        _, g = pseudo_loglik_gradient(space.unpack(res.x), ds)
        assert np.linalg.norm(space.pack(g)) < 1e-6

    def test_thread_count_invariance(self, small_schema):
        rng = np.random.default_rng(9)
        t, ds = random_theta(small_schema, rng), random_dataset(small_schema, 2 * CHUNK_ROWS + 777, rng)
        f1, g1 = pseudo_loglik_gradient(t, ds, threads=1)
        f4, g4 = pseudo_loglik_gradient(t, ds, threads=4)
        f4b, g4b = pseudo_loglik_gradient(t, ds, threads=4)
        space = ParamSpace(small_schema)
        assert f4 == f4b and np.array_equal(space.pack(g4), space.pack(g4b))
        assert abs(f1 - f4) <= 1e-10
        np.testing.assert_allclose(space.pack(g1), space.pack(g4), rtol=0, atol=1e-10)


class TestPenalty:
    def _binaries(self, n=100):
        schema = VariableSchema((Variable("a", "continuous"), Variable("b", "continuous"),
                                 Variable("u", "discrete", ("0", "1"), "0"),
                                 Variable("v", "discrete", ("0", "1"), "0")))
        rng = np.random.default_rng(0)
        X = rng.normal(size=(n, 2))
        X = (X - X.mean(0)) / X.std(0, ddof=1)
        D = np.c_[np.arange(n) % 2, (np.arange(n) // 2) % 2]
        return Dataset(schema, X, D)

    def test_weights(self):
        w = compute_penalty_weights(self._binaries())
        np.testing.assert_allclose(w.w_cc, 1.0, atol=1e-12)
        np.testing.assert_allclose(w.w_cd, math.sqrt(0.5), atol=1e-12)
        np.testing.assert_allclose(w.w_dd, 0.5, atol=1e-12)

    def test_baseline_multiplier_in_thresholds(self):
        ds = self._binaries()
        w = compute_penalty_weights(ds, baseline_multiplier=10.0)
        space = ParamSpace(ds.schema)
        thr = w.thresholds(space)
        rho = thr[space.slices["rho"]].reshape(2, 4)
        np.testing.assert_allclose(rho[:, [0, 2]], 10 * math.sqrt(0.5))
        np.testing.assert_allclose(rho[:, [1, 3]], math.sqrt(0.5))
        assert np.all(thr[space.mask("beta_diag", "alpha", "phi_node")] == 0)

    def test_zero_theta(self):
        ds = self._binaries()
        assert penalty_value(Theta.zeros(ds.schema), compute_penalty_weights(ds), 2.0) == 0.0

    def test_single_beta(self):
        ds = self._binaries()
        t = Theta.zeros(ds.schema)
        t.beta[0, 1] = t.beta[1, 0] = 2.0
        w = compute_penalty_weights(ds)
        w.w_cc[:] = 1.0
        assert penalty_value(t, w, 0.5) == pytest.approx(1.0, abs=1e-15)

    def test_phi_block_abs_sum(self):
        ds = self._binaries()
        t = Theta.zeros(ds.schema)
        t.set_phi_block(0, 1, [[1.0, -1.0], [0.0, 2.0]])
        w = compute_penalty_weights(ds, baseline_multiplier=1.0)
        w.w_dd[:] = 1.0
        assert penalty_value(t, w, 1.0) == 4.0

    def test_unpenalized_parts(self):
        ds = self._binaries()
        t = Theta.zeros(ds.schema, beta_diag=5.0)
        t.alpha[:] = 3.0
        t.phi[np.diag_indices(4)] = 2.0
        assert penalty_value(t, compute_penalty_weights(ds), 1.0) == 0.0

    def test_negative_lambda(self):
        ds = self._binaries()
        with pytest.raises(ValueError):
            penalty_value(Theta.zeros(ds.schema), compute_penalty_weights(ds), -0.1)
