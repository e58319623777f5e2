"""Label taxonomies, layer weights, and hierarchical similarity.

A taxonomy is a rooted tree of height K (root at layer 1). Assignable
labels are the leaves, all of which must sit at depth exactly K. Two items
are similar at layer k when their labels share the same ancestor node at
that layer; layers are weighted by importance, decreasing with depth, and
the weighted per-layer agreements combine into a single similarity in
[-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CycleDetected,
    DuplicateEdge,
    EmptyInput,
    FileFormatError,
    HeightTooSmall,
    LayerOutOfRange,
    MultipleRoots,
    RaggedLeafDepth,
    SimilarityCapExceeded,
    UnknownLabel,
)

# n x n similarity matrices above this item count must be requested explicitly;
# training only ever needs batch-restricted submatrices.
DEFAULT_MATRIX_CAP = 20_000


@dataclass(frozen=True)
class LayerWeights:
    """Per-layer importance weights: zero at the root, decreasing below it."""

    K: int
    u: np.ndarray  # length K, u[k-1] is the weight of layer k

    def weight(self, k: int) -> float:
        if not 1 <= k <= self.K:
            raise LayerOutOfRange(f"layer {k} outside [1, {self.K}]")
        return float(self.u[k - 1])


def layer_weights(K: int) -> LayerWeights:
    """Weights u_k = 2(K+1-k)/(K(K-1)) for k >= 2, u_1 = 0."""
    if K < 2:
        raise HeightTooSmall(f"taxonomy height must be >= 2, got {K}")
    u = np.zeros(K, dtype=np.float64)
    ks = np.arange(2, K + 1, dtype=np.float64)
    u[1:] = 2.0 * (K + 1 - ks) / (K * (K - 1))
    u.setflags(write=False)
    return LayerWeights(K=K, u=u)


def _similarity_by_depth(K: int) -> np.ndarray:
    """Similarity for a pair whose deepest common ancestor sits at depth d.

    Equals 2 * sum_{k=2..d} u_k - 1, evaluated in closed form so that the
    endpoints are exact: d=1 gives -1.0 and d=K gives 1.0 bit for bit.
    Index 0 of the returned table is unused (d >= 1 always; the root is
    shared by every pair).
    """
    table = np.empty(K + 1, dtype=np.float64)
    table[0] = np.nan
    for d in range(1, K + 1):
        table[d] = 1.0 - 2.0 * ((K - d) * (K - d + 1)) / (K * (K - 1))
    table.setflags(write=False)
    return table


class Taxonomy:
    """Rooted label tree of fixed height with all leaves at the bottom layer."""

    def __init__(self, parent: dict[str, str | None]):
        roots = [n for n, p in parent.items() if p is None]
        if not roots:
            raise CycleDetected("every node has a parent; the edges contain a cycle")
        if len(roots) > 1:
            raise MultipleRoots(f"expected exactly one root, found {len(roots)}")
        self.root = roots[0]
        self._parent = dict(parent)

        children: dict[str, list[str]] = {n: [] for n in parent}
        for node, par in parent.items():
            if par is not None:
                children[par].append(node)
        self._children = children

        # BFS from the root; unreachable nodes imply a parent loop.
        self._depth: dict[str, int] = {self.root: 1}
        frontier = [self.root]
        while frontier:
            nxt = []
            for node in frontier:
                for child in children[node]:
                    self._depth[child] = self._depth[node] + 1
                    nxt.append(child)
            frontier = nxt
        if len(self._depth) != len(parent):
            raise CycleDetected("some nodes are not reachable from the root")

        self.K = max(self._depth.values())
        if self.K < 2:
            raise HeightTooSmall("taxonomy has no layers below the root")
        self.leaves = frozenset(n for n in parent if not children[n])
        for leaf in self.leaves:
            if self._depth[leaf] != self.K:
                raise RaggedLeafDepth(
                    f"leaf {leaf!r} at depth {self._depth[leaf]}, expected {self.K}"
                )

        self.weights = layer_weights(self.K)
        self._sim_by_depth = _similarity_by_depth(self.K)
        # Leaf ancestor chains as integer rows for vectorized similarity.
        node_ids = {n: i for i, n in enumerate(sorted(parent))}
        leaf_list = sorted(self.leaves)
        self._leaf_row = {leaf: i for i, leaf in enumerate(leaf_list)}
        chains = np.empty((len(leaf_list), self.K), dtype=np.int64)
        for i, leaf in enumerate(leaf_list):
            node = leaf
            for k in range(self.K, 0, -1):
                chains[i, k - 1] = node_ids[node]
                node = self._parent[node]
        chains.setflags(write=False)
        self._leaf_chains = chains

    # --- structure queries ---------------------------------------------------

    def __contains__(self, label: str) -> bool:
        return label in self._parent

    def depth(self, node: str) -> int:
        if node not in self._depth:
            raise UnknownLabel(f"unknown node {node!r}")
        return self._depth[node]

    def parent(self, node: str) -> str | None:
        if node not in self._parent:
            raise UnknownLabel(f"unknown node {node!r}")
        return self._parent[node]

    def ancestor_at(self, label: str, k: int) -> str:
        """The unique ancestor of `label` at layer k (itself when depth == k)."""
        d = self.depth(label)
        if not 1 <= k <= self.K or k > d:
            raise LayerOutOfRange(f"layer {k} invalid for node at depth {d} (K={self.K})")
        node = label
        for _ in range(d - k):
            node = self._parent[node]
        return node

    def _leaf_index(self, label: str) -> int:
        idx = self._leaf_row.get(label)
        if idx is None:
            raise UnknownLabel(f"{label!r} is not a leaf label")
        return idx

    # --- similarity ------------------------------------------------------------

    def layer_similarity(self, a: str, b: str, k: int) -> int:
        """1 iff a and b share the layer-k ancestor and k != 1, else 0."""
        same = self.ancestor_at(a, k) == self.ancestor_at(b, k)
        return int(same and k != 1)

    def shared_depth(self, a: str, b: str) -> int:
        """Depth of the deepest common ancestor of two leaves."""
        ca = self._leaf_chains[self._leaf_index(a)]
        cb = self._leaf_chains[self._leaf_index(b)]
        agree = ca == cb
        d = 0
        while d < self.K and agree[d]:
            d += 1
        return d

    def hier_similarity(self, a: str, b: str) -> float:
        """Layer-weighted similarity of two leaf labels, in [-1, 1]."""
        return float(self._sim_by_depth[self.shared_depth(a, b)])

    def label_rows(self, labels) -> np.ndarray:
        """Leaf chain-row indices for a sequence of labels."""
        return np.fromiter(
            (self._leaf_index(lab) for lab in labels), dtype=np.int64, count=len(labels)
        )

    def shared_depths(self, rows_a: np.ndarray, rows_b: np.ndarray) -> np.ndarray:
        """Pairwise deepest-common-ancestor depths for two row-index vectors."""
        ca = self._leaf_chains[rows_a]
        cb = self._leaf_chains[rows_b]
        depths = np.zeros(len(rows_a), dtype=np.int64)
        alive = np.ones(len(rows_a), dtype=bool)
        for k in range(self.K):
            alive &= ca[:, k] == cb[:, k]
            depths += alive
        return depths

    def similarities_at_depths(self, depths: np.ndarray) -> np.ndarray:
        """Similarity values for deepest-common-ancestor depths in [1, K]."""
        return self._sim_by_depth[depths]

    def similarity_matrix(self, labels, cap: int = DEFAULT_MATRIX_CAP) -> np.ndarray:
        """Dense pairwise hierarchical similarities for the given leaf labels."""
        n = len(labels)
        if n > cap:
            raise SimilarityCapExceeded(
                f"{n} items exceed the dense-matrix cap of {cap}; "
                "compute per-batch similarities instead"
            )
        rows = self.label_rows(labels)
        chains = self._leaf_chains[rows]  # n x K
        depths = np.zeros((n, n), dtype=np.int64)
        alive = np.ones((n, n), dtype=bool)
        for k in range(self.K):
            alive &= chains[:, k, None] == chains[None, :, k]
            depths += alive
        return self._sim_by_depth[depths]


def parse_taxonomy(text: str) -> Taxonomy:
    """Parse a tab-separated edge list ("parent<TAB>child" per line).

    Lines starting with '#' and blank lines are ignored. The root is the
    unique node that never appears as a child.
    """
    parent: dict[str, str | None] = {}
    seen_children: set[str] = set()
    n_edges = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise FileFormatError(
                f"line {lineno}: expected 'parent<TAB>child', got {raw!r}"
            )
        par, child = parts
        if child in seen_children:
            raise DuplicateEdge(f"line {lineno}: node {child!r} already has a parent")
        seen_children.add(child)
        parent[child] = par
        parent.setdefault(par, None)
        n_edges += 1
    if n_edges == 0:
        raise EmptyInput("taxonomy file contains no edges")
    # A parent that later appeared as a child keeps its recorded parent; nodes
    # never seen as a child keep None. Zero such nodes means every node has a
    # parent, which in a finite graph forces a cycle.
    roots = [n for n, p in parent.items() if p is None]
    if not roots:
        raise CycleDetected("every node has a parent; the edge list contains a cycle")
    return Taxonomy(parent)
