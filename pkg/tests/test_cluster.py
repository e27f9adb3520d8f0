import math

import numpy as np
import pytest

from regimescope.cluster import (
    MAX_DISTANCE,
    Merge,
    SegmentDistanceMatrix,
    build_distance_matrix,
    complete_link,
    cut_tree,
    dendrogram_from_dict,
    dendrogram_to_dict,
    phases_from_dict,
    phases_to_dict,
    segment_distance,
    to_newick,
)
from regimescope.errors import BadKError, TooFewSegmentsError
from regimescope.stats import GaussianStats, build_prefix_stats, gaussian_max_loglik, interval_stats

from helpers import brute_force_complete_link


def gs(n, mean, var):
    return GaussianStats(n=n, mean=mean, variance=var)


class TestSegmentDistance:
    def test_identical_stats_distance_zero(self):
        a = gs(100, 0.0, 1.0)
        assert segment_distance(a, gs(100, 0.0, 1.0)) == 0.0

    def test_variance_contrast(self):
        d = segment_distance(gs(100, 0.0, 1.0), gs(100, 0.0, 100.0))
        expected = 0.5 * (200 * math.log(50.5) - 100 * math.log(100.0))
        assert d == pytest.approx(expected, abs=1e-10)
        assert d == pytest.approx(161.9, abs=0.1)

    def test_mean_contrast_between_means_term(self):
        d = segment_distance(gs(100, 0.0, 1.0), gs(100, 10.0, 1.0))
        assert d == pytest.approx(0.5 * 200 * math.log(26.0), abs=1e-10)
        assert d == pytest.approx(325.8, abs=0.1)

    def test_matches_brute_force_sample_merge(self):
        # Build real samples with exactly the target statistics, then compare
        # against merged-vs-separate log-likelihoods over those samples.
        rng = np.random.default_rng(8)
        for mean_b, var_b in [(0.0, 100.0), (10.0, 1.0), (3.0, 7.0)]:
            xa = rng.normal(0, 1, 100)
            xa = (xa - xa.mean()) / xa.std()  # exact n=100, mean 0, var 1
            xb = rng.normal(0, 1, 100)
            xb = (xb - xb.mean()) / xb.std() * math.sqrt(var_b) + mean_b
            stats_a = GaussianStats(100, float(xa.mean()), float(xa.var()))
            stats_b = GaussianStats(100, float(xb.mean()), float(xb.var()))
            merged = np.concatenate([xa, xb])
            p = build_prefix_stats(merged)
            ref = (
                gaussian_max_loglik(interval_stats(p, 1, 100))
                + gaussian_max_loglik(interval_stats(p, 101, 200))
                - gaussian_max_loglik(interval_stats(p, 1, 200))
            )
            assert segment_distance(stats_a, stats_b) == pytest.approx(ref, rel=1e-9, abs=1e-9)

    def test_degenerate_pairs(self):
        assert segment_distance(gs(5, 1.0, 0.0), gs(9, 1.0, 0.0)) == 0.0
        assert segment_distance(gs(5, 1.0, 0.0), gs(9, 2.0, 0.0)) == MAX_DISTANCE

    def test_matrix_symmetric_zero_diagonal(self):
        rng = np.random.default_rng(3)
        stats = [
            gs(int(rng.integers(5, 50)), rng.normal(), float(rng.uniform(0.1, 9)))
            for _ in range(12)
        ]
        dm = build_distance_matrix(stats)
        assert np.allclose(dm.values, dm.values.T, atol=1e-12)
        assert np.all(np.diag(dm.values) == 0.0)
        assert np.all(dm.values >= 0.0)


class TestCompleteLink:
    def test_three_segment_example(self):
        d = np.array([[0.0, 0.1, 5.0], [0.1, 0.0, 6.0], [5.0, 6.0, 0.0]])
        tree = complete_link(SegmentDistanceMatrix(values=d, sigmas=(1.0, 1.1, 3.0)))
        assert tree.merges[0] == Merge(left=0, right=1, height=0.1, count=2)
        # complete link takes the max of {5, 6}
        assert tree.merges[1].height == 6.0
        assert tree.merges[1].count == 3

    def test_equidistant_ties_deterministic(self):
        d = np.ones((4, 4)) - np.eye(4)
        dm = SegmentDistanceMatrix(values=d, sigmas=(1.0, 2.0, 3.0, 4.0))
        tree = complete_link(dm)
        assert [m.height for m in tree.merges] == [1.0, 1.0, 1.0]
        assert (tree.merges[0].left, tree.merges[0].right) == (0, 1)
        assert (tree.merges[1].left, tree.merges[1].right) == (2, 3)
        assert (tree.merges[2].left, tree.merges[2].right) == (4, 5)

    def test_matches_brute_force_reference(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            m = int(rng.integers(2, 21))
            d = rng.uniform(0.01, 10, (m, m))
            d = np.triu(d, 1)
            d = d + d.T
            dm = SegmentDistanceMatrix(values=d, sigmas=tuple(rng.uniform(1, 5, m)))
            tree = complete_link(dm)
            ref = brute_force_complete_link(d)
            got = [(mg.left, mg.right, mg.height, mg.count) for mg in tree.merges]
            assert got == ref

    def test_heights_non_decreasing(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            m = int(rng.integers(2, 25))
            d = rng.uniform(0, 100, (m, m))
            d = np.triu(d, 1)
            d = d + d.T
            tree = complete_link(SegmentDistanceMatrix(values=d, sigmas=tuple([1.0] * m)))
            heights = [mg.height for mg in tree.merges]
            assert all(y >= x for x, y in zip(heights, heights[1:]))

    def test_too_few_segments(self):
        with pytest.raises(TooFewSegmentsError):
            complete_link(SegmentDistanceMatrix(values=np.zeros((1, 1)), sigmas=(1.0,)))


def cluster_stats(sigmas, n=200):
    return [gs(n, 0.0, s * s) for s in sigmas]


class TestCutTree:
    def test_full_cut_singletons(self):
        stats = cluster_stats([1.0, 2.0, 5.0, 9.0])
        tree = complete_link(build_distance_matrix(stats))
        phases = cut_tree(tree, 4)
        assert sorted(phases.cluster_of) == [0, 1, 2, 3]
        assert all(c.count == 1 for c in phases.clusters)

    def test_close_sigmas_group_together(self):
        stats = cluster_stats([1.0, 1.01, 10.0])
        tree = complete_link(build_distance_matrix(stats))
        phases = cut_tree(tree, 2)
        assert phases.cluster_of[0] == phases.cluster_of[1]
        assert phases.cluster_of[2] != phases.cluster_of[0]

    def test_four_cluster_labels(self):
        stats = cluster_stats([5.0, 20.0, 60.0, 150.0])
        tree = complete_link(build_distance_matrix(stats))
        phases = cut_tree(tree, 4)
        by_rank = sorted(phases.clusters, key=lambda c: c.mean_sigma)
        assert [c.label for c in by_rank] == ["low", "moderate", "high", "extreme"]

    def test_two_cluster_labels_low_high(self):
        stats = cluster_stats([1.0, 1.2, 20.0])
        tree = complete_link(build_distance_matrix(stats))
        phases = cut_tree(tree, 2)
        assert [c.label for c in phases.clusters] == ["low", "high"]

    def test_seven_cluster_palette_mirrors_subpairs(self):
        stats = cluster_stats([1.0, 2.0, 10.0, 20.0, 50.0, 70.0, 150.0])
        tree = complete_link(build_distance_matrix(stats))
        phases = cut_tree(tree, 7)
        assert [c.label for c in phases.clusters] == [
            "low", "low", "moderate", "moderate", "high", "high", "extreme",
        ]
        assert [c.color for c in phases.clusters] == [
            "#00008B", "#0000FF", "#00FFFF", "#008000", "#FFFF00", "#FFA500", "#FF0000",
        ]

    def test_labels_rank_ordered_by_sigma(self):
        rng = np.random.default_rng(5)
        stats = cluster_stats(list(rng.uniform(0.5, 200, 9)))
        tree = complete_link(build_distance_matrix(stats))
        for k in range(2, 10):
            phases = cut_tree(tree, k)
            order = ["low", "moderate", "high", "extreme"]
            ranks = [order.index(c.label) for c in phases.clusters]
            sigmas = [c.mean_sigma for c in phases.clusters]
            assert sigmas == sorted(sigmas)
            assert ranks == sorted(ranks)

    def test_nested_cuts_differ_by_one_merge(self):
        rng = np.random.default_rng(6)
        stats = cluster_stats(list(rng.uniform(0.5, 100, 12)))
        tree = complete_link(build_distance_matrix(stats))
        for k in range(3, 13):
            hi = cut_tree(tree, k)
            lo = cut_tree(tree, k - 1)

            def partition(phases):
                groups = {}
                for seg, cid in enumerate(phases.cluster_of):
                    groups.setdefault(cid, set()).add(seg)
                return {frozenset(g) for g in groups.values()}

            p_hi, p_lo = partition(hi), partition(lo)
            merged = p_hi - p_lo
            created = p_lo - p_hi
            assert len(merged) == 2 and len(created) == 1
            assert set().union(*merged) == next(iter(created))

    def test_label_invariance_under_relabeling(self):
        sigmas = [1.0, 30.0, 1.1, 29.0, 80.0, 81.0]
        stats = cluster_stats(sigmas)
        tree = complete_link(build_distance_matrix(stats))
        phases = cut_tree(tree, 3)
        perm = [3, 0, 5, 2, 4, 1]
        stats_p = [stats[i] for i in perm]
        tree_p = complete_link(build_distance_matrix(stats_p))
        phases_p = cut_tree(tree_p, 3)
        for new_pos, old_pos in enumerate(perm):
            label_old = phases.clusters[phases.cluster_of[old_pos]].label
            label_new = phases_p.clusters[phases_p.cluster_of[new_pos]].label
            assert label_old == label_new

    def test_bad_k(self):
        stats = cluster_stats([1.0, 2.0, 3.0])
        tree = complete_link(build_distance_matrix(stats))
        for k in (1, 4, 0, -2):
            with pytest.raises(BadKError):
                cut_tree(tree, k)


def test_newick_and_json_round_trip():
    stats = cluster_stats([1.0, 4.0, 20.0, 21.0])
    tree = complete_link(build_distance_matrix(stats))
    doc = dendrogram_to_dict(tree)
    assert dendrogram_from_dict(doc) == tree

    nwk = to_newick(tree)
    assert nwk.endswith(";")
    assert nwk.count("(") == len(tree.merges)
    for i in range(4):
        assert f"s{i}:" in nwk

    phases = cut_tree(tree, 2)
    pdoc = phases_to_dict(phases)
    assert phases_from_dict(pdoc) == phases
