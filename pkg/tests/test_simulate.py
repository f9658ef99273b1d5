import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mixgm.errors import NumericalError
from mixgm.graph import Edge, MixedGraph, Node, aggregate
from mixgm.simulate import (
    GroundTruth, confounded_suite, discrete_joint, empirical_joint, gibbs_sample, is_diagonally_dominant,
    random_sparse_theta, recovery_metrics, synthetic_schema, total_variation,
)
from mixgm.theta import Theta


class TestRandomTheta:
    def test_density_zero(self):
        assert aggregate(random_sparse_theta(4, 3, [2, 3, 2], density=0.0, seed=1).theta).edges == []

    def test_complete_gaussian(self):
        gt = random_sparse_theta(3, 0, [], density=1.0, seed=1)
        assert len(gt.graph.edges) == 3

    def test_diagonal_dominance_sweep(self):
        for seed in range(1000):
            gt = random_sparse_theta(6, 2, [2, 3], density=0.5, effect_scale=0.5, seed=seed)
            assert is_diagonally_dominant(gt.theta.beta, margin=0.1), seed

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 2.0))
    def test_entries_and_baselines(self, seed, scale):
        gt = random_sparse_theta(4, 3, [2, 3, 2], density=0.7, effect_scale=scale, seed=seed)
        t = gt.theta
        t.check()
        s = t.schema
        vals = np.r_[t.beta[np.triu_indices(4, 1)], t.rho.ravel(),
                     t.phi[np.triu_indices(s.n_indicators, 1)]]
        nz = np.abs(vals[vals != 0])
        assert np.all((nz >= scale / 2 * (1 - 1e-12)) & (nz <= scale * (1 + 1e-12)))
        isb = s.indicator_is_baseline
        assert np.all(t.rho[:, isb] == 0) and np.all(t.phi[isb] == 0)
        assert gt.graph == aggregate(t)

    def test_bad_levels(self):
        with pytest.raises(ValueError):
            random_sparse_theta(2, 2, [2], seed=0)

    def test_save_load(self, tmp_path):
        gt = random_sparse_theta(3, 2, [2, 3], density=0.5, seed=4)
        gt.save(tmp_path / "truth.json")
        back = GroundTruth.load(tmp_path / "truth.json")
        assert back.generation_seed == 4 and back.density == 0.5
        np.testing.assert_array_equal(back.theta.phi, gt.theta.phi)
        assert back.graph == gt.graph


class TestGibbs:
    def test_independent_case(self):
        t = Theta.zeros(synthetic_schema(2, 2, [2, 3]))
        ds = gibbs_sample(t, 10_000, burn_in=50, thinning=1, seed=0, n_chains=100)
        for k in range(2):
            assert stats.kstest(ds.continuous[:, k], "norm").pvalue > 0.01
        for j, L in enumerate([2, 3]):
            counts = np.bincount(ds.discrete[:, j], minlength=L)
            assert stats.chisquare(counts).pvalue > 0.01

    def test_discrete_joint_frequencies(self):
        gt = random_sparse_theta(0, 2, [2, 2], density=1.0, effect_scale=1.0, seed=0)
        states, exact = discrete_joint(gt.theta)
        assert exact.sum() == pytest.approx(1.0, abs=1e-15)
        ds = gibbs_sample(gt, 40_000, seed=1, n_chains=200)
        assert total_variation(exact, empirical_joint(ds, states)) < 0.02

    def test_gaussian_covariance(self):
        t = Theta.zeros(synthetic_schema(2, 0, []))
        t.beta[:] = [[1.0, -0.5], [-0.5, 1.0]]
        ds = gibbs_sample(t, 20_000, seed=2, n_chains=200)
        np.testing.assert_allclose(np.cov(ds.continuous.T), np.linalg.inv(t.beta), atol=0.05)

    def test_bit_reproducible(self):
        gt = random_sparse_theta(3, 2, [2, 3], density=0.5, seed=3)
        a = gibbs_sample(gt, 300, burn_in=20, thinning=2, seed=9)
        b = gibbs_sample(gt, 300, burn_in=20, thinning=2, seed=9)
        assert np.array_equal(a.continuous, b.continuous) and np.array_equal(a.discrete, b.discrete)
        c = gibbs_sample(gt, 300, burn_in=20, thinning=2, seed=10)
        assert not np.array_equal(a.continuous, c.continuous)

    def test_refuses_ill_posed(self):
        t = Theta.zeros(synthetic_schema(2, 0, []))
        t.beta[0, 1] = t.beta[1, 0] = 1.5
        with pytest.raises(NumericalError):
            gibbs_sample(t, 10)

    @pytest.mark.parametrize("kwargs", [dict(burn_in=-1), dict(thinning=0), dict(n_chains=0)])
    def test_bad_arguments(self, kwargs):
        with pytest.raises(ValueError):
            gibbs_sample(Theta.zeros(synthetic_schema(2, 0, [])), 10, **kwargs)

    def test_row_count(self):
        ds = gibbs_sample(Theta.zeros(synthetic_schema(1, 1, [2])), 101, burn_in=0, n_chains=10)
        assert ds.n == 101


def _g(edges):
    return MixedGraph([Node(n) for n in "abcd"], [Edge(a, b, 1.0, s) for a, b, s in edges])


class TestRecovery:
    truth = [("a", "b", "+"), ("b", "c", "-"), ("c", "d", "+"), ("a", "d", "-")]

    def test_identical(self):
        m = recovery_metrics(_g(self.truth), _g(self.truth))
        assert (m["precision"], m["recall"], m["f1"], m["sign_agreement"]) == (1.0, 1.0, 1.0, 1.0)

    def test_empty_estimate(self):
        m = recovery_metrics(_g(self.truth), _g([]))
        assert m["precision"] == 1.0 and m["recall"] == 0.0 and m["empty_estimate"]

    def test_half(self):
        m = recovery_metrics(_g(self.truth), _g(self.truth[:2]))
        assert m["precision"] == 1.0 and m["recall"] == 0.5

    def test_signs_and_false_positives(self):
        est = [("b", "a", "-"), ("b", "c", "-"), ("a", "c", "+")]
        m = recovery_metrics(_g(self.truth), _g(est))
        assert m["precision"] == pytest.approx(2 / 3) and m["sign_agreement"] == 0.5

    def test_node_mismatch(self):
        other = MixedGraph([Node("a"), Node("z")])
        with pytest.raises(ValueError):
            recovery_metrics(_g(self.truth), other)


def test_confounded_suite_shape():
    ds = confounded_suite(seed=0, n=500)
    assert ds.n == 500 and ds.schema.p + ds.schema.q == 30 and ds.schema.q == 2
    assert ds.schema["m1_e2"].kind == "discrete" and ds.schema["m3_e2"].kind == "continuous"
    a = confounded_suite(seed=0, n=500)
    assert np.array_equal(a.continuous, ds.continuous)
