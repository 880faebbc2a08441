import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bethe_hessian.detect import (
    NO_INFORMATIVE,
    ClusterConfig,
    cluster,
    default_epsilon,
    embed,
    estimate_counts,
    kmeans,
    overlap,
    overlap_bruteforce,
    theory_report,
)
from bethe_hessian.errors import BelowThreshold, LengthMismatch, SubcriticalDegree
from bethe_hessian.graph import SparseGraph
from bethe_hessian.model import ks_root, nu, sample_graph, signal_spectrum, validate_model

ASSORTATIVE = ([[10, 2], [2, 10]], [0.5, 0.5])
DISASSORTATIVE = ([[2, 10], [10, 2]], [0.5, 0.5])


@pytest.fixture(scope="module")
def assortative_sample():
    return sample_graph(validate_model(*ASSORTATIVE, 4000), 1)


@pytest.fixture(scope="module")
def dis_sample():
    return sample_graph(validate_model(*DISASSORTATIVE, 4000), 1)


class TestCounting:
    def test_default_epsilon(self):
        assert default_epsilon(4000) == pytest.approx(1 / math.log(4000))

    def test_assortative(self, assortative_sample):
        c = estimate_counts(assortative_sample.graph)
        assert (c.r_plus, c.r_minus, c.r) == (2, 0, 2)
        assert c.eps == pytest.approx(1 / math.log(4000))

    def test_disassortative(self, dis_sample):
        c = estimate_counts(dis_sample.graph)
        assert (c.r_plus, c.r_minus) == (1, 1)

    def test_empty_graph_refused(self):
        with pytest.raises(SubcriticalDegree):
            estimate_counts(SparseGraph.empty(10))


class TestEmbedding:
    def test_assortative_shapes_and_alignment(self, assortative_sample):
        emb = embed(assortative_sample.graph)
        assert emb.V_plus.shape == (4000, 2) and emb.V_minus.shape == (4000, 0)
        np.testing.assert_allclose(emb.V.T @ emb.V, np.eye(2), atol=1e-8)
        assert np.all(np.diff(emb.values_plus) > 0)
        v1, v2 = emb.V_plus.T
        # first column keeps one sign on most vertices, second splits by block
        assert max(np.mean(v1 > 0), np.mean(v1 < 0)) > 0.9
        sigma = assortative_sample.sigma
        means = [v2[sigma == k].mean() for k in (0, 1)]
        assert means[0] * means[1] < 0

    def test_disassortative_shapes(self, dis_sample):
        emb = embed(dis_sample.graph)
        assert emb.V_plus.shape == (4000, 1) and emb.V_minus.shape == (4000, 1)


class TestKMeans:
    def test_separated_clouds(self):
        rng = np.random.default_rng(0)
        a = rng.normal(0, 0.1, (50, 2))
        b = rng.normal(10, 0.1, (60, 2))
        res = kmeans(np.vstack([a, b]), 2, seed=1)
        assert overlap(np.r_[np.zeros(50), np.ones(60)].astype(int), res.labels) == 1.0
        within = ((a - a.mean(0)) ** 2).sum() + ((b - b.mean(0)) ** 2).sum()
        assert res.cost == pytest.approx(within)

    def test_identical_points(self):
        res = kmeans(np.ones((30, 2)), 2)
        assert res.cost == 0.0
        assert set(res.labels.tolist()) == {0, 1}
        assert res.empty_repairs > 0

    def test_restart_saturation(self):
        rng = np.random.default_rng(2)
        centers = np.array([[0, 0], [3, 0], [1.5, 2.5]])
        X = np.vstack([c + rng.normal(0, 0.9, (150, 2)) for c in centers])
        ours = kmeans(X, 3, restarts=20, seed=5).cost
        best = kmeans(X, 3, restarts=1000, seed=6).cost
        assert ours <= 1.01 * best

    def test_deterministic(self):
        X = np.random.default_rng(3).standard_normal((200, 3))
        a, b = kmeans(X, 4, seed=7), kmeans(X, 4, seed=7)
        assert np.array_equal(a.labels, b.labels) and a.cost == b.cost
        assert len(a.restart_costs) == 20 and min(a.restart_costs) == a.cost


class TestCluster:
    def test_assortative_overlap(self, assortative_sample):
        res = cluster(assortative_sample.graph)
        assert res.r_hat == 2
        assert set(np.unique(res.sigma_hat)) <= {0, 1}
        assert overlap(assortative_sample.sigma, res.sigma_hat) >= 0.75

    def test_disassortative_overlap(self, dis_sample):
        res = cluster(dis_sample.graph)
        assert (res.r_hat_plus, res.r_hat_minus) == (1, 1)
        assert overlap(dis_sample.sigma, res.sigma_hat) >= 0.75

    def test_deterministic(self, assortative_sample):
        a = cluster(assortative_sample.graph, ClusterConfig(seed=3))
        b = cluster(assortative_sample.graph, ClusterConfig(seed=3))
        assert np.array_equal(a.sigma_hat, b.sigma_hat)

    def test_no_informative(self):
        cycle = SparseGraph.from_edges(100, [(i, (i + 1) % 100) for i in range(100)])
        res = cluster(cycle)
        assert res.r_hat == 0 and NO_INFORMATIVE in res.flags
        assert np.all(res.sigma_hat == 0)
        assert res.to_dict()["flags"] == [NO_INFORMATIVE]

    def test_below_threshold_single_community(self):
        d, mu = 6.0, 0.5 * math.sqrt(6.0)
        p = validate_model([[d + mu, d - mu], [d - mu, d + mu]], [0.5, 0.5], 3000)
        res = cluster(sample_graph(p, 0).graph)
        assert res.r_hat == 1


labels = st.lists(st.integers(0, 4), min_size=1, max_size=40)


class TestOverlap:
    def test_examples(self):
        s = np.array([0, 0, 1, 1, 1, 2])
        assert overlap(s, s) == 1.0
        assert overlap(s, (s + 1) % 3) == 1.0
        assert overlap(s, np.zeros(6, dtype=int)) == pytest.approx(0.5)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            overlap([0, 1], [0])

    @settings(max_examples=100, deadline=None)
    @given(st.data())
    def test_matches_bruteforce_and_invariances(self, data):
        s = np.array(data.draw(labels))
        h = np.array(data.draw(st.lists(st.integers(0, 4), min_size=len(s), max_size=len(s))))
        ov = overlap(s, h)
        assert ov == pytest.approx(overlap_bruteforce(s, h))
        perm = np.array(data.draw(st.permutations(range(5))))
        assert overlap(perm[s], h) == pytest.approx(ov)
        assert overlap(s, perm[h]) == pytest.approx(ov)
        assert overlap(perm[s], perm[h]) == pytest.approx(ov)
        assert ov >= np.mean(s == h) - 1e-12
        assert 0 <= ov <= 1


class TestTheoryReport:
    def test_assortative(self, assortative_sample):
        spec = signal_spectrum(assortative_sample.params)
        rep = theory_report(assortative_sample, spec)
        assert rep.flags["real_outliers"] and rep.flags["kernel"]
        assert abs(rep.xy[1][1] - 1.65625) <= 0.2
        assert rep.outliers["+"]["predicted"] == pytest.approx([-5.1464, -1.4722], abs=1e-4)
        assert all(g <= math.sqrt(12) for g in rep.outliers["+"]["gaps"])
        d = rep.to_dict()
        assert d["passed"] == rep.passed

    def test_below_threshold(self):
        # mu_1 = d > 1 is always informative for a valid model, so strip it by hand
        p = validate_model([[3, 3], [3, 3]], [0.5, 0.5], 200)
        spec_none = dataclasses.replace(signal_spectrum(p), r0=0, plus_idx=np.zeros(0, int),
                                        minus_idx=np.zeros(0, int))
        with pytest.raises(BelowThreshold):
            theory_report(sample_graph(p, 0), spec_none)


class TestScalarLaws:
    @pytest.mark.parametrize("d", [2.0, 3.0, 6.0, 12.0])
    @pytest.mark.parametrize("shift", [0.0, 1.0])
    def test_nu_non_increasing(self, d, shift):
        t = math.sqrt(d) + shift
        mu = np.linspace(math.sqrt(d) * (1 + 1e-6), 20 * d, 20000)
        vals = nu(mu, d, t)
        assert np.all(np.diff(vals) <= 1e-12 * np.maximum(1, np.abs(vals[1:])))

    @pytest.mark.parametrize("d", [2.0, 3.0, 6.0, 12.0, 50.0])
    def test_second_root_below_sqrt_d(self, d):
        mu = np.linspace(math.sqrt(d) * (1 + 1e-9), 50 * d, 50000)
        assert np.all(ks_root(d, mu) < math.sqrt(d))

    @given(st.floats(2.0, 100.0), st.floats(1e-6, 10.0))
    def test_second_root_property(self, d, excess):
        mu = math.sqrt(d) + excess
        assert ks_root(d, mu) < math.sqrt(d)
