"""Segmented hierarchy-weighted deep hashing: similarity-preserving binary
codes for hierarchically labeled data, a weighted-Hamming index with
lookup-table search, and hierarchy-aware ranking metrics."""

__version__ = "0.1.0"

from .codes import (
    Architecture,
    BinaryCode,
    CodeDatabase,
    HashModel,
    SCHEME_EFFECTIVE,
    SCHEME_PAPER_LITERAL,
    SegmentLayout,
    encode_batch,
    forward,
    init_model,
    quantize,
    segment_layout,
)
from .errors import ShdhError
from .hierarchy import LayerWeights, Taxonomy, layer_weights, parse_taxonomy
from .index import (
    QueryLUT,
    SearchResult,
    brute_force_topn,
    build_query_lut,
    search_radius,
    search_topn,
    weighted_distance,
)
from .metrics import (
    MetricReport,
    acg_at,
    dcg_at,
    eval_queries,
    ndcg_at,
    relevance,
    weighted_recall_at,
)
from .train import (
    TrainConfig,
    TrainLog,
    backprop_step,
    finite_diff_gradient,
    loss,
    loss_gradient,
    train,
)

__all__ = [
    "Architecture",
    "BinaryCode",
    "CodeDatabase",
    "HashModel",
    "LayerWeights",
    "MetricReport",
    "QueryLUT",
    "SCHEME_EFFECTIVE",
    "SCHEME_PAPER_LITERAL",
    "SearchResult",
    "SegmentLayout",
    "ShdhError",
    "Taxonomy",
    "TrainConfig",
    "TrainLog",
    "acg_at",
    "backprop_step",
    "brute_force_topn",
    "build_query_lut",
    "dcg_at",
    "encode_batch",
    "eval_queries",
    "finite_diff_gradient",
    "forward",
    "init_model",
    "layer_weights",
    "loss",
    "loss_gradient",
    "ndcg_at",
    "parse_taxonomy",
    "quantize",
    "relevance",
    "search_radius",
    "search_topn",
    "segment_layout",
    "train",
    "weighted_distance",
    "weighted_recall_at",
]
