import numpy as np
import pytest

from shdh.codes import CodeDatabase, quantize, segment_layout
from shdh.errors import IdealMismatch, RankTooLarge, UnknownLabel, ZeroTotalRelevance
from shdh.metrics import (
    acg_at,
    dcg_at,
    eval_queries,
    ndcg_at,
    ranked_relevances,
    relevance,
    weighted_recall_at,
    weighted_recall_curves,
)

from oracles import acg_brute, dcg_brute, ndcg_brute, weighted_recall_brute

# Frozen from the scalar oracle: DCG@3 of [1, 0.5, 0] and NDCG@3 of the
# reversed ranking of [2, 1, 0] under gains 2^s - 1 and log2(i+1) discounts.
DCG_HAND = 1.2613396608340124
NDCG_REVERSED_HAND = 0.58688267143572


class TestRelevance:
    def test_self_shared_layers(self, toy3):
        assert relevance(toy3, "rose", "rose", "shared-layers") == 2.0

    def test_sibling_shared_layers(self, toy3):
        assert relevance(toy3, "rose", "sun", "shared-layers") == 1.0

    def test_opposite_hier_similarity(self, toy3):
        assert relevance(toy3, "rose", "tiger", "hier-similarity") == -1.0

    def test_unknown(self, toy3):
        with pytest.raises(UnknownLabel):
            relevance(toy3, "rose", "daisy")

    def test_modes_rank_candidates_identically(self, fig4):
        # both modes are monotone in the depth of the deepest common ancestor
        candidates = ["rose", "sunflower", "oak", "tiger"]
        shared = [relevance(fig4, "rose", c, "shared-layers") for c in candidates]
        hier = [relevance(fig4, "rose", c, "hier-similarity") for c in candidates]
        assert np.argsort(shared).tolist() == np.argsort(hier).tolist()


class TestACG:
    def test_hand_mean(self):
        assert acg_at([2, 1, 0], 3) == 1.0

    def test_single(self):
        assert acg_at([2, 1, 0], 1) == 2.0

    def test_zeros(self):
        assert acg_at([0, 0, 0], 2) == 0.0

    def test_rank_too_large(self):
        with pytest.raises(RankTooLarge):
            acg_at([1, 2], 3)
        with pytest.raises(RankTooLarge):
            acg_at([1, 2], 0)


class TestDCG:
    def test_hand_value(self):
        assert dcg_at([1, 0.5, 0], 3) == pytest.approx(DCG_HAND, abs=1e-12)

    def test_first_position_undiscounted(self):
        assert dcg_at([1.0], 1) == 1.0

    def test_zeros(self):
        assert dcg_at([0, 0, 0], 3) == 0.0

    def test_adjacent_swap_increases_dcg(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            rels = rng.integers(0, 4, size=8).astype(float)
            i = int(rng.integers(0, 7))
            if rels[i] >= rels[i + 1]:
                continue
            swapped = rels.copy()
            swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
            assert dcg_at(swapped, 8) > dcg_at(rels, 8)


class TestNDCG:
    def test_ideal_is_one(self):
        assert ndcg_at([2, 1, 0], [2, 1, 0], 3) == 1.0

    def test_reversed_hand_value(self):
        assert ndcg_at([0, 1, 2], [2, 1, 0], 3) == pytest.approx(NDCG_REVERSED_HAND, abs=1e-12)

    def test_all_equal_relevances(self):
        assert ndcg_at([1, 1, 1], [1, 1, 1], 2) == 1.0

    def test_zero_ideal_defined_as_one(self):
        assert ndcg_at([0, 0], [0, 0], 2) == 1.0

    def test_ideal_mismatch(self):
        with pytest.raises(IdealMismatch):
            ndcg_at([1, 2], [2, 2], 2)
        with pytest.raises(IdealMismatch):
            ndcg_at([1, 2], [1, 2], 2)  # not sorted descending

    def test_bounds_for_nonnegative(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            rels = rng.uniform(0, 3, size=10)
            ideal = np.sort(rels)[::-1]
            v = ndcg_at(rels, ideal, int(rng.integers(1, 11)))
            assert 0.0 <= v <= 1.0 + 1e-12


class TestWeightedRecall:
    def test_full_list_is_one(self):
        assert weighted_recall_at([2, 1, 0.5], 3) == 1.0

    def test_hand_sums(self):
        assert weighted_recall_at([2, 1, 1, 0], 2) == pytest.approx(3 / 4, rel=1e-15)

    def test_signed_relevances_can_exceed_one(self):
        assert weighted_recall_at([1, 2 / 3, -1], 2) == pytest.approx(2.5, rel=1e-12)

    def test_zero_total(self):
        with pytest.raises(ZeroTotalRelevance):
            weighted_recall_at([0, 0, 0], 1)

    def test_nondecreasing_in_n(self):
        rng = np.random.default_rng(4)
        rels = rng.uniform(0, 2, size=20)
        values = [weighted_recall_at(rels, n) for n in range(1, 21)]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
        assert values[-1] == 1.0
        assert all(acg_at(rels, n) >= 0.0 for n in range(1, 21))


class TestOracleAgreement:
    def test_random_rankings_match_reference(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            N = int(rng.integers(3, 30))
            if rng.random() < 0.5:
                rels = rng.integers(0, 4, size=N).astype(float)
            else:
                rels = rng.uniform(0, 3, size=N)
            if rels.sum() == 0:
                rels[0] = 1.0
            n = int(rng.integers(1, N + 1))
            rl = rels.tolist()
            assert acg_at(rels, n) == pytest.approx(acg_brute(rl, n), abs=1e-9)
            assert dcg_at(rels, n) == pytest.approx(dcg_brute(rl, n), abs=1e-9)
            ideal = np.sort(rels)[::-1]
            assert ndcg_at(rels, ideal, n) == pytest.approx(ndcg_brute(rl, n), abs=1e-9)
            assert weighted_recall_at(rels, n) == pytest.approx(
                weighted_recall_brute(rl, n), abs=1e-9)

    def test_relabeling_invariance(self):
        # metrics depend only on the relevance sequence, not item identity
        rels = [2.0, 0.0, 1.0, 1.0]
        ideal = sorted(rels, reverse=True)
        base = (acg_at(rels, 3), dcg_at(rels, 3), ndcg_at(rels, ideal, 3),
                weighted_recall_at(rels, 3))
        again = (acg_at(list(rels), 3), dcg_at(list(rels), 3),
                 ndcg_at(list(rels), ideal, 3), weighted_recall_at(list(rels), 3))
        assert base == again


def _two_item_db(layout, codes):
    packed = np.stack([c.packed for c in codes])
    return CodeDatabase(layout=layout, packed=packed)


class TestEvalQueries:
    def test_perfect_self_retrieval(self, toy3):
        layout = segment_layout(8, 3)
        self_code = quantize(np.full(8, 1.0), layout)
        far_code = quantize(np.full(8, -1.0), layout)
        db = _two_item_db(layout, [self_code, far_code])
        report = eval_queries(db, ["rose", "tiger"], [self_code], ["rose"], toy3, ns=[1, 2])
        assert report.mean("ndcg", 2) == 1.0
        assert report.mean("acg", 1) == 2.0

    def test_random_leq_ideal(self, toy3):
        rng = np.random.default_rng(6)
        layout = segment_layout(8, 3)
        labels = ["rose", "sun", "tiger", "oak"] * 5
        packed = np.stack([quantize(rng.normal(size=8), layout).packed for _ in labels])
        db = CodeDatabase(layout=layout, packed=packed)
        q = quantize(rng.normal(size=8), layout)
        report = eval_queries(db, labels, [q], ["rose"], toy3, ns=[10])
        assert report.per_query["ndcg"][0, 0] <= 1.0 + 1e-12

    def test_zero_relevance_excluded_from_wr(self, toy3):
        layout = segment_layout(8, 3)
        a = quantize(np.full(8, 1.0), layout)
        db = _two_item_db(layout, [a, a])
        # query label shares nothing with db labels: zero total shared-layers
        report = eval_queries(db, ["tiger", "oak"], [a], ["rose"], toy3, ns=[1])
        assert report.wr_excluded == 1
        assert np.isnan(report.per_query["weighted_recall"][0, 0])

    def test_threads_match_serial(self, toy3):
        rng = np.random.default_rng(7)
        layout = segment_layout(16, 3)
        labels = ["rose", "sun", "tiger", "oak"] * 8
        packed = np.stack([quantize(rng.normal(size=16), layout).packed for _ in labels])
        db = CodeDatabase(layout=layout, packed=packed)
        queries = [quantize(rng.normal(size=16), layout) for _ in range(6)]
        qlabels = ["rose", "tiger", "sun", "oak", "rose", "sun"]
        serial = eval_queries(db, labels, queries, qlabels, toy3, ns=[5, 10], threads=1)
        pooled = eval_queries(db, labels, queries, qlabels, toy3, ns=[5, 10], threads=4)
        for metric in serial.per_query:
            np.testing.assert_array_equal(serial.per_query[metric], pooled.per_query[metric])

    def test_rank_too_large(self, toy3):
        layout = segment_layout(8, 3)
        a = quantize(np.full(8, 1.0), layout)
        db = _two_item_db(layout, [a, a])
        with pytest.raises(RankTooLarge):
            eval_queries(db, ["rose", "sun"], [a], ["rose"], toy3, ns=[3])


class TestCurves:
    def test_wr_vs_n_monotone_and_ends_at_one(self, toy3):
        rng = np.random.default_rng(8)
        layout = segment_layout(16, 3)
        labels = ["rose", "sun", "tiger", "oak"] * 6
        packed = np.stack([quantize(rng.normal(size=16), layout).packed for _ in labels])
        db = CodeDatabase(layout=layout, packed=packed)
        queries = [quantize(rng.normal(size=16), layout) for _ in range(4)]
        qlabels = ["rose", "sun", "oak", "tiger"]
        ns, wr_n, radii, wr_r = weighted_recall_curves(db, labels, queries, qlabels, toy3)
        assert len(ns) == len(db) and ns[0] == 1
        assert np.all(np.diff(wr_n) >= -1e-12)
        assert wr_n[-1] == pytest.approx(1.0, rel=1e-12)
        assert np.all(np.diff(radii) > 0)
        assert np.all(np.diff(wr_r) >= -1e-12)
        assert wr_r[-1] == pytest.approx(1.0, rel=1e-12)

    def test_ranked_relevances_order(self, toy3):
        layout = segment_layout(8, 3)
        a = quantize(np.full(8, 1.0), layout)
        b = quantize(np.full(8, -1.0), layout)
        db = _two_item_db(layout, [a, b])
        rels = ranked_relevances(toy3, "rose", ["rose", "tiger"])
        np.testing.assert_array_equal(rels, [2.0, 0.0])
