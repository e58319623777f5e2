"""Hierarchy-aware ranking metrics: ACG, DCG, NDCG, Weighted Recall.

Relevance of a retrieved item to the query comes in two modes:

* ``shared-layers`` (default): the number of non-root layers on which the
  two labels share an ancestor, an integer in [0, K-1]. Matches the
  magnitude scale of published hierarchical-retrieval results.
* ``hier-similarity``: the layer-weighted similarity in [-1, 1]. Signed,
  so Weighted Recall can exceed 1 under this mode; kept for fidelity.

Formulas (printed in report headers so results are self-describing):
  ACG@n = (1/n) sum_{i<=n} s_i
  DCG@n = sum_{i<=n} (2^{s_i} - 1) / log2(i + 1)
  NDCG@n = DCG@n / DCG@n(descending-sorted), and 1 when the ideal is 0
  WR@n = sum_{i<=n} s_i / sum_{i<=N} s_i
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .codes import BinaryCode, CodeDatabase
from .errors import IdealMismatch, RankTooLarge, ShapeMismatch, ZeroTotalRelevance
from .hierarchy import Taxonomy
from .index import search_topn

MODE_SHARED_LAYERS = "shared-layers"
MODE_HIER_SIMILARITY = "hier-similarity"
MODES = (MODE_SHARED_LAYERS, MODE_HIER_SIMILARITY)

METRIC_NAMES = ("acg", "dcg", "ndcg", "weighted_recall")

FORMULAS = {
    "acg": "ACG@n = mean of top-n relevances",
    "dcg": "DCG@n = sum_i (2^s_i - 1)/log2(i+1), i = 1..n",
    "ndcg": "NDCG@n = DCG@n / ideal DCG@n (1 when ideal is 0)",
    "weighted_recall": "WR@n = sum_{i<=n} s_i / sum_{i<=N} s_i",
}


def relevance(tax: Taxonomy, q_label: str, item_label: str,
              mode: str = MODE_SHARED_LAYERS) -> float:
    """Relevance of one item to the query under the chosen mode."""
    if mode == MODE_SHARED_LAYERS:
        return float(tax.shared_depth(q_label, item_label) - 1)
    if mode == MODE_HIER_SIMILARITY:
        return tax.hier_similarity(q_label, item_label)
    raise ValueError(f"unknown relevance mode {mode!r}, expected one of {MODES}")


def _check_rank(rels: np.ndarray, n: int):
    if not 1 <= n <= len(rels):
        raise RankTooLarge(f"rank {n} outside [1, {len(rels)}]")


def acg_at(rels, n: int) -> float:
    rels = np.asarray(rels, dtype=np.float64)
    _check_rank(rels, n)
    return float(rels[:n].mean())


def dcg_at(rels, n: int) -> float:
    rels = np.asarray(rels, dtype=np.float64)
    _check_rank(rels, n)
    discounts = np.log2(np.arange(2, n + 2, dtype=np.float64))
    return float(((np.exp2(rels[:n]) - 1.0) / discounts).sum())


def ndcg_at(rels, ideal_rels, n: int) -> float:
    rels = np.asarray(rels, dtype=np.float64)
    ideal = np.asarray(ideal_rels, dtype=np.float64)
    if len(rels) != len(ideal) or not np.array_equal(np.sort(rels), np.sort(ideal)):
        raise IdealMismatch("ideal ranking must be the same relevance multiset")
    if not np.array_equal(ideal, np.sort(ideal)[::-1]):
        raise IdealMismatch("ideal ranking must be sorted descending")
    denom = dcg_at(ideal, n)
    if denom == 0.0:
        return 1.0
    return dcg_at(rels, n) / denom


def weighted_recall_at(rels, n: int) -> float:
    rels = np.asarray(rels, dtype=np.float64)
    _check_rank(rels, n)
    total = float(rels.sum())
    if total == 0.0:
        raise ZeroTotalRelevance("query has zero total relevance over the database")
    return float(rels[:n].sum()) / total


@dataclass
class MetricReport:
    """Per-query and mean metric values at each requested cutoff."""

    ns: list[int]
    mode: str
    query_ids: list
    # metric -> (n_queries x len(ns)) array; NaN marks excluded WR cells
    per_query: dict[str, np.ndarray]
    means: dict[str, np.ndarray] = field(default_factory=dict)
    wr_excluded: int = 0

    def mean(self, metric: str, n: int) -> float:
        return float(self.means[metric][self.ns.index(n)])

    def to_csv_rows(self):
        """(query id, n, metric, value) rows, means last with query id 'mean'."""
        rows = []
        for qi, qid in enumerate(self.query_ids):
            for metric in METRIC_NAMES:
                for ni, n in enumerate(self.ns):
                    val = self.per_query[metric][qi, ni]
                    rows.append((qid, n, metric, "" if np.isnan(val) else repr(float(val))))
        for metric in METRIC_NAMES:
            for ni, n in enumerate(self.ns):
                rows.append(("mean", n, metric, repr(float(self.means[metric][ni]))))
        return rows

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "ns": self.ns,
            "queries": len(self.query_ids),
            "weighted_recall_excluded_queries": self.wr_excluded,
            "formulas": FORMULAS,
            "means": {
                metric: {str(n): float(self.means[metric][ni]) for ni, n in enumerate(self.ns)}
                for metric in METRIC_NAMES
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def ranked_relevances(tax: Taxonomy, q_label: str, ranked_labels,
                      mode: str = MODE_SHARED_LAYERS) -> np.ndarray:
    """Relevance of every database item, in retrieval-ranking order."""
    q_rows = tax.label_rows([q_label] * len(ranked_labels))
    item_rows = tax.label_rows(ranked_labels)
    depths = tax.shared_depths(q_rows, item_rows)
    if mode == MODE_SHARED_LAYERS:
        return (depths - 1).astype(np.float64)
    if mode == MODE_HIER_SIMILARITY:
        return tax.similarities_at_depths(depths)
    raise ValueError(f"unknown relevance mode {mode!r}, expected one of {MODES}")


def _ranked_relevance_arrays(db, db_labels, queries, query_labels, tax, mode, threads):
    """Per query: (relevances, distances) along the full database ranking."""
    db_labels = list(db_labels)
    row_of_id = {item_id: i for i, item_id in enumerate(db.ids)}

    def rank_one(args):
        qcode, q_label = args
        result = search_topn(db, qcode, n=len(db))
        ranked_labels = [db_labels[row_of_id[item_id]] for item_id in result.ids]
        return ranked_relevances(tax, q_label, ranked_labels, mode), result.distances

    pairs = list(zip(queries, query_labels))
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(rank_one, pairs))
    return [rank_one(p) for p in pairs]


def eval_queries(db: CodeDatabase, db_labels, queries: list[BinaryCode], query_labels,
                 tax: Taxonomy, mode: str = MODE_SHARED_LAYERS,
                 ns: list[int] = (100,), query_ids=None, threads: int = 1) -> MetricReport:
    """Rank the database for every query and score all four metrics at each n.

    Queries whose total relevance is zero are excluded from the Weighted
    Recall means (their WR cells are NaN); the exclusion count is reported.
    """
    if len(queries) != len(query_labels):
        raise ShapeMismatch(f"{len(queries)} queries but {len(query_labels)} labels")
    if len(db_labels) != len(db):
        raise ShapeMismatch(f"{len(db_labels)} labels for {len(db)} database items")
    ns = list(ns)
    for n in ns:
        if not 1 <= n <= len(db):
            raise RankTooLarge(f"rank {n} outside [1, {len(db)}]")
    if query_ids is None:
        query_ids = list(range(len(queries)))

    nq = len(queries)
    per_query = {m: np.full((nq, len(ns)), np.nan) for m in METRIC_NAMES}
    wr_excluded = 0
    ranked = _ranked_relevance_arrays(db, db_labels, queries, query_labels, tax, mode, threads)

    for qi, (rels, _) in enumerate(ranked):
        ideal = np.sort(rels)[::-1]
        total = float(rels.sum())
        for ni, n in enumerate(ns):
            per_query["acg"][qi, ni] = acg_at(rels, n)
            per_query["dcg"][qi, ni] = dcg_at(rels, n)
            per_query["ndcg"][qi, ni] = ndcg_at(rels, ideal, n)
            if total != 0.0:
                per_query["weighted_recall"][qi, ni] = weighted_recall_at(rels, n)
        if total == 0.0:
            wr_excluded += 1

    means = {}
    for metric in METRIC_NAMES:
        vals = per_query[metric]
        if metric == "weighted_recall":
            means[metric] = (np.nanmean(vals, axis=0) if np.isfinite(vals).any()
                             else np.full(len(ns), np.nan))
        else:
            means[metric] = vals.mean(axis=0)
    return MetricReport(
        ns=ns,
        mode=mode,
        query_ids=list(query_ids),
        per_query=per_query,
        means=means,
        wr_excluded=wr_excluded,
    )


def weighted_recall_curves(db: CodeDatabase, db_labels, queries, query_labels,
                           tax: Taxonomy, mode: str = MODE_SHARED_LAYERS,
                           max_radius_samples: int = 512, threads: int = 1):
    """Mean Weighted Recall sweeps for curve exports.

    Returns (ns, wr_by_n, radii, wr_by_radius): WR@n for every n in [1, N]
    and WR within distance r over a grid of observed distances (subsampled
    evenly past `max_radius_samples`). Zero-total-relevance queries are
    excluded from both means.
    """
    ranked = _ranked_relevance_arrays(db, db_labels, queries, query_labels, tax, mode, threads)
    kept = [(rels, dists) for rels, dists in ranked if float(rels.sum()) != 0.0]
    N = len(db)
    ns = np.arange(1, N + 1, dtype=np.int64)
    if not kept:
        empty = np.full(N, np.nan)
        return ns, empty, np.array([0.0]), np.array([np.nan])

    cum = np.stack([np.cumsum(rels) / rels.sum() for rels, _ in kept])
    wr_by_n = cum.mean(axis=0)

    radii = np.unique(np.concatenate([dists for _, dists in kept]))
    if len(radii) > max_radius_samples:
        take = np.linspace(0, len(radii) - 1, max_radius_samples).round().astype(int)
        radii = radii[np.unique(take)]
    wr_r = np.zeros((len(kept), len(radii)))
    for i, (rels, dists) in enumerate(kept):
        # dists are ascending; items within radius r form a prefix
        counts = np.searchsorted(dists, radii, side="right")
        cum_i = np.concatenate([[0.0], np.cumsum(rels) / rels.sum()])
        wr_r[i] = cum_i[counts]
    return ns, wr_by_n, radii, wr_r.mean(axis=0)
