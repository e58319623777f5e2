"""Weighted-Hamming search over packed codes with lookup-table acceleration.

The distance between two codes is sum_k u_k * (differing bits in segment k).
Because segments are byte-aligned, each packed byte belongs to exactly one
segment, so a 256-entry table per byte chunk maps an XOR byte value to its
weighted contribution. Both the LUT path and the brute-force oracle add the
per-chunk contributions in the same fixed layout order, so their float
results agree bit for bit.

Larger weighted inner product (the similarity reading of the same segment
counts) means more similar; ranking ascending by distance equals ranking
descending by that inner product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import BinaryCode, CodeDatabase, SegmentLayout, unpack_bits
from .errors import EmptyDatabase, LayoutMismatch

POPCOUNT8 = np.array([bin(b).count("1") for b in range(256)], dtype=np.float64)
POPCOUNT8.setflags(write=False)


@dataclass(frozen=True, eq=False)
class QueryLUT:
    """Per-chunk tables: table[c, x] = weighted contribution of XOR byte x."""

    layout: SegmentLayout
    table: np.ndarray  # n_chunks x 256, float64


@dataclass(eq=False)
class SearchResult:
    """Hits ascending by weighted distance, ties by insertion order."""

    ids: list
    distances: np.ndarray       # weighted Hamming distance D_w
    inner_products: np.ndarray  # sum_k u_k * (L_k - 2 * ham_k)

    def __len__(self):
        return len(self.ids)

    def rows(self):
        return list(zip(self.ids, self.distances.tolist(), self.inner_products.tolist()))


def _require_same_layout(a: SegmentLayout, b: SegmentLayout):
    if a != b:
        raise LayoutMismatch("codes were built with different segment layouts")


def weighted_distance(a: BinaryCode, b: BinaryCode, layout: SegmentLayout | None = None) -> float:
    """D_w between two codes; 0 iff all nonzero-weight segments agree."""
    if layout is None:
        layout = a.layout
    _require_same_layout(a.layout, layout)
    _require_same_layout(b.layout, layout)
    xor = np.bitwise_xor(a.packed, b.packed)
    d = 0.0
    for c, chunk in enumerate(layout.chunks()):
        d += chunk.weight * float(POPCOUNT8[xor[c] & chunk.mask])
    return d


def build_query_lut(q: BinaryCode, layout: SegmentLayout | None = None) -> QueryLUT:
    """Tables such that summing table[c][xor byte c] over chunks reproduces
    weighted_distance(q, ·) exactly."""
    if layout is None:
        layout = q.layout
    _require_same_layout(q.layout, layout)
    chunks = layout.chunks()
    table = np.empty((len(chunks), 256), dtype=np.float64)
    xs = np.arange(256, dtype=np.uint8)
    for c, chunk in enumerate(chunks):
        table[c] = chunk.weight * POPCOUNT8[xs & np.uint8(chunk.mask)]
    return QueryLUT(layout=layout, table=table)


def _lut_distances(db: CodeDatabase, q: BinaryCode) -> np.ndarray:
    lut = build_query_lut(q, db.layout)
    xored = np.bitwise_xor(db.packed, q.packed[None, :])
    dist = np.zeros(len(db), dtype=np.float64)
    for c in range(xored.shape[1]):  # fixed chunk order keeps float sums exact
        dist += lut.table[c][xored[:, c]]
    return dist


def _take(db: CodeDatabase, distances: np.ndarray, order: np.ndarray) -> SearchResult:
    max_inner = db.layout.max_distance  # sum_k u_k * L_k
    d = distances[order]
    return SearchResult(
        ids=[db.ids[i] for i in order],
        distances=d,
        inner_products=max_inner - 2.0 * d,
    )


def search_topn(db: CodeDatabase, q: BinaryCode, n: int) -> SearchResult:
    """The n nearest codes by D_w via the LUT path (all items if n > |db|)."""
    if len(db) == 0:
        raise EmptyDatabase("cannot search an empty code database")
    if n < 1:
        raise ValueError("n must be >= 1")
    _require_same_layout(q.layout, db.layout)
    dist = _lut_distances(db, q)
    order = np.argsort(dist, kind="stable")[:n]
    return _take(db, dist, order)


def search_radius(db: CodeDatabase, q: BinaryCode, r: float) -> SearchResult:
    """All codes with D_w <= r, ascending, ties by insertion order."""
    if len(db) == 0:
        raise EmptyDatabase("cannot search an empty code database")
    if r < 0:
        raise ValueError("radius must be >= 0")
    _require_same_layout(q.layout, db.layout)
    dist = _lut_distances(db, q)
    within = np.flatnonzero(dist <= r)
    order = within[np.argsort(dist[within], kind="stable")]
    return _take(db, dist, order)


def brute_force_topn(db: CodeDatabase, q: BinaryCode, n: int) -> SearchResult:
    """Oracle twin of search_topn: per-bit comparison on unpacked codes, no
    lookup tables, same per-chunk accumulation order."""
    if len(db) == 0:
        raise EmptyDatabase("cannot search an empty code database")
    if n < 1:
        raise ValueError("n must be >= 1")
    _require_same_layout(q.layout, db.layout)
    layout = db.layout
    db_bits = unpack_bits(layout, db.packed)        # n x L, 0/1
    q_bits = unpack_bits(layout, q.packed[None, :])[0]
    mismatch = db_bits != q_bits

    dist = np.zeros(len(db), dtype=np.float64)
    for seg in layout.segments:
        lo = seg.bit_offset
        for byte_start in range(lo, lo + seg.width, 8):
            byte_end = min(byte_start + 8, lo + seg.width)
            count = mismatch[:, byte_start:byte_end].sum(axis=1).astype(np.float64)
            dist += seg.weight * count
    order = np.argsort(dist, kind="stable")[:n]
    return _take(db, dist, order)
