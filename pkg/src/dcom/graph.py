"""Sparse directed radius-adjacency graph, coverage computation, degree ranks.

Edges are stored as a coordinate list sorted by (source, target) with a
liveness mask, so pruning never reallocates and out-degrees stay consistent.
Construction finds candidate pairs with a BLAS inner-product pass and then
confirms every candidate with an exact float64 difference-based distance, so
the edge set matches a brute-force O(n^2) scan bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import EmbeddingSet

_CHUNK_ROWS = 512


@dataclass(frozen=True)
class CoverageState:
    """Boolean covered flags plus their exact mean."""

    covered: np.ndarray
    probability: float


class RadiusGraph:
    """Directed adjacency at a fixed radius with prunable edges."""

    def __init__(self, n, radius, src, dst):
        self.n = int(n)
        self.radius = float(radius)
        self._src = src
        self._dst = dst
        self._alive = np.ones(len(src), dtype=bool)
        self._out_degree = np.bincount(src, minlength=self.n).astype(np.int64)
        # Static CSR over construction edges: geometric ball lookups survive pruning.
        self._out_indptr = np.concatenate(
            ([0], np.cumsum(np.bincount(src, minlength=self.n)))
        )
        order = np.argsort(dst, kind="stable")
        self._in_edge_ids = order
        self._in_indptr = np.concatenate(
            ([0], np.cumsum(np.bincount(dst[order], minlength=self.n)))
        )

    @property
    def edges(self):
        """Alive (source, target) pairs, sorted by (source, target)."""
        return np.column_stack((self._src[self._alive], self._dst[self._alive]))

    @property
    def out_degree(self):
        return self._out_degree.copy()

    def ball_members(self, v):
        """Points within the construction radius of v, excluding v itself."""
        return self._dst[self._out_indptr[v] : self._out_indptr[v + 1]]

    def prune_incoming(self, targets):
        """Remove every alive edge whose target is in targets."""
        targets = np.asarray(targets, dtype=np.int64)
        if targets.size == 0:
            return
        if targets.size > 1024:
            mask = np.zeros(self.n, dtype=bool)
            mask[targets] = True
            ids = np.flatnonzero(self._alive & mask[self._dst])
        else:
            spans = [
                self._in_edge_ids[self._in_indptr[t] : self._in_indptr[t + 1]]
                for t in targets
            ]
            ids = np.concatenate(spans) if spans else np.empty(0, dtype=np.int64)
            ids = ids[self._alive[ids]]
        if ids.size == 0:
            return
        self._alive[ids] = False
        np.subtract.at(self._out_degree, self._src[ids], 1)

    def prune_outgoing(self, sources):
        """Remove every alive edge whose source is in sources."""
        sources = np.asarray(sources, dtype=np.int64)
        if sources.size == 0:
            return
        for s in sources:
            lo, hi = self._out_indptr[s], self._out_indptr[s + 1]
            self._alive[lo:hi] = False
        self._out_degree[sources] = 0


def build_radius_graph(embedding_set: EmbeddingSet, delta: float) -> RadiusGraph:
    """All ordered pairs at exact distance <= delta, without self-loops."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    points32 = embedding_set.vectors
    points = points32.astype(np.float64)
    n = embedding_set.count
    sq_norms32 = (points32 * points32).sum(axis=1)
    thresh = delta * delta
    # Loose float32 candidate threshold; exact float64 refinement below.
    margin = np.float32(thresh + 1e-3 * (1.0 + 2.0 * float(sq_norms32.max()))) if n else thresh

    src_parts, dst_parts = [], []
    for lo in range(0, n, _CHUNK_ROWS):
        hi = min(lo + _CHUNK_ROWS, n)
        gram = points32[lo:hi] @ points32.T
        cand_sq = sq_norms32[lo:hi, None] - 2.0 * gram + sq_norms32[None, :]
        cand_src, cand_dst = np.nonzero(cand_sq <= margin)
        cand_src = cand_src + lo
        keep = cand_src != cand_dst
        cand_src, cand_dst = cand_src[keep], cand_dst[keep]
        if cand_src.size:
            diff = points[cand_src] - points[cand_dst]
            exact = (diff * diff).sum(axis=1)
            keep = exact <= thresh
            cand_src, cand_dst = cand_src[keep], cand_dst[keep]
        src_parts.append(cand_src.astype(np.int64))
        dst_parts.append(cand_dst.astype(np.int64))
    src = np.concatenate(src_parts) if src_parts else np.empty(0, dtype=np.int64)
    dst = np.concatenate(dst_parts) if dst_parts else np.empty(0, dtype=np.int64)
    return RadiusGraph(n, delta, src, dst)


def covered_set(embedding_set, labeled, deltas) -> CoverageState:
    """Union of closed per-point balls around the labeled points."""
    labeled = np.asarray(labeled, dtype=np.int64)
    deltas = np.asarray(deltas, dtype=np.float64)
    if labeled.shape != deltas.shape:
        raise ValueError(
            f"labeled length {labeled.size} does not match deltas length {deltas.size}"
        )
    points = embedding_set.vectors.astype(np.float64)
    covered = np.zeros(embedding_set.count, dtype=bool)
    covered[labeled] = True
    for idx, radius in zip(labeled, deltas):
        diff = points - points[idx]
        covered |= (diff * diff).sum(axis=1) <= radius * radius
    probability = float(int(covered.sum()) / embedding_set.count)
    return CoverageState(covered, probability)


def prune_incoming_for_covered(graph: RadiusGraph, covered) -> None:
    """Drop every edge that targets a covered node (idempotent)."""
    covered = np.asarray(covered, dtype=bool)
    if covered.shape != (graph.n,):
        raise ValueError(f"covered must have length {graph.n}")
    graph.prune_incoming(np.flatnonzero(covered))


def prune_outgoing_for_labeled(graph: RadiusGraph, labeled) -> None:
    """Drop every edge sourced at a labeled node (idempotent)."""
    graph.prune_outgoing(np.asarray(labeled, dtype=np.int64))


def out_degree_rank(graph: RadiusGraph, candidates) -> np.ndarray:
    """Out-degrees over the candidates, normalized by their max (0/0 -> 0)."""
    candidates = np.asarray(candidates, dtype=np.int64)
    if candidates.size == 0:
        raise ValueError("candidate list must be non-empty")
    degrees = graph._out_degree[candidates].astype(np.float64)
    top = degrees.max()
    if top == 0:
        return np.zeros(candidates.size)
    return degrees / top
