"""Purity-curve estimation with k-means pseudo-labels and initial radius selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import EmbeddingSet
from .errors import NoDeltaMeetsAlpha

DEFAULT_ALPHA = 0.95
# 0.05 steps from 0.05 to 2.0, suited to L2-normalized embeddings.
DEFAULT_GRID = np.round(np.arange(1, 41) * 0.05, 10)

# Allowed upward jitter when validating that an estimated curve is
# monotonically non-increasing.
_MONOTONE_JITTER = 0.02


@dataclass(frozen=True)
class PurityCurve:
    """Estimated fraction of pure balls for each radius on a grid."""

    grid: np.ndarray
    purity: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=np.float64)
        purity = np.asarray(self.purity, dtype=np.float64)
        if grid.size == 0 or grid.size != purity.size:
            raise ValueError("grid and purity must be non-empty and equal length")
        if not (np.diff(grid) > 0).all():
            raise ValueError("grid must be strictly increasing")
        if purity.min() < 0.0 or purity.max() > 1.0:
            raise ValueError("purity values must lie in [0, 1]")
        if (np.diff(purity) > _MONOTONE_JITTER).any():
            raise ValueError("purity curve increases beyond estimation jitter")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "purity", purity)


def _pairwise_sq_dists(points, centers=None):
    """Exact squared distances computed from float64 coordinate differences."""
    points = points.astype(np.float64)
    centers = points if centers is None else centers.astype(np.float64)
    out = np.empty((centers.shape[0], points.shape[0]))
    for i, c in enumerate(centers):
        diff = points - c
        out[i] = (diff * diff).sum(axis=1)
    return out


def kmeans_cluster(
    embedding_set: EmbeddingSet,
    k: int,
    seed: int = 0,
    max_iters: int = 100,
    return_sse_history: bool = False,
):
    """Lloyd's k-means with farthest-first init, deterministic per seed.

    The first center is drawn uniformly with the seeded generator; each
    subsequent center is the point farthest from the chosen set (lowest index
    on ties). Empty clusters are repaired by moving the point currently
    farthest from its own centroid. Iteration stops at an assignment fixpoint
    or after max_iters.
    """
    n = embedding_set.count
    if k <= 0:
        raise ValueError("k must be positive")
    if k > n:
        raise ValueError(f"k={k} exceeds point count {n}")
    points = embedding_set.vectors.astype(np.float64)
    rng = np.random.default_rng(seed)

    centers_idx = [int(rng.integers(n))]
    min_sq = _pairwise_sq_dists(points, points[centers_idx[-1]][None])[0]
    for _ in range(1, k):
        nxt = int(np.argmax(min_sq))
        centers_idx.append(nxt)
        diff = points - points[nxt]
        min_sq = np.minimum(min_sq, (diff * diff).sum(axis=1))
    centroids = points[centers_idx].copy()

    labels = None
    history = []
    for _ in range(max_iters):
        sq = _pairwise_sq_dists(points, centroids)
        new_labels = sq.argmin(axis=0)
        assigned_sq = sq[new_labels, np.arange(n)]

        for c in range(k):
            if not (new_labels == c).any():
                worst = int(np.argmax(assigned_sq))
                new_labels[worst] = c
                assigned_sq[worst] = 0.0

        history.append(float(assigned_sq.sum()))
        if labels is not None and np.array_equal(labels, new_labels):
            break
        labels = new_labels
        for c in range(k):
            centroids[c] = points[labels == c].mean(axis=0)

    result = labels.astype(np.int64)
    if return_sse_history:
        return result, history
    return result


def is_pure_ball(embedding_set, labels, center: int, delta: float) -> bool:
    """True iff every point within delta of the center shares its label."""
    labels = np.asarray(labels)
    diff = embedding_set.vectors.astype(np.float64) - embedding_set.vectors[
        center
    ].astype(np.float64)
    inside = (diff * diff).sum(axis=1) <= delta * delta
    return bool((labels[inside] == labels[center]).all())


def min_impure_distance(embedding_set, labels, centers=None) -> np.ndarray:
    """Distance from each center to its nearest differently-labeled point.

    A ball around a center is pure exactly when its radius is strictly below
    this distance (closed balls), so the purity curve falls out of a single
    pass over these values.
    """
    labels = np.asarray(labels)
    points = embedding_set.vectors.astype(np.float64)
    if centers is None:
        centers = np.arange(embedding_set.count)
    out = np.empty(len(centers))
    for i, c in enumerate(centers):
        diff = points - points[c]
        sq = (diff * diff).sum(axis=1)
        other = labels != labels[c]
        out[i] = np.sqrt(sq[other].min()) if other.any() else np.inf
    return out


def estimate_purity_curve(
    embedding_set, labels, grid, sample=None, num_classes=None
) -> PurityCurve:
    """Fraction of centers whose ball stays pure, for each grid radius.

    All points act as centers unless a sample of indices is supplied; a
    sample must contain at least num_classes entries.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    if not (np.diff(grid) > 0).all():
        raise ValueError("grid must be strictly increasing")
    if sample is not None:
        if num_classes is None:
            num_classes = len(np.unique(np.asarray(labels)))
        if len(sample) < num_classes:
            raise ValueError(
                f"sample of {len(sample)} centers is below num_classes={num_classes}"
            )
    thresholds = min_impure_distance(embedding_set, labels, sample)
    purity = (thresholds[None, :] > grid[:, None]).mean(axis=1)
    return PurityCurve(grid, purity)


def select_initial_delta(curve: PurityCurve, alpha: float = DEFAULT_ALPHA) -> float:
    """Largest grid radius whose purity is still >= alpha."""
    passing = np.flatnonzero(curve.purity >= alpha)
    if passing.size == 0:
        raise NoDeltaMeetsAlpha(
            f"no grid delta reaches purity {alpha}; max purity {curve.purity.max():.4f}"
        )
    return float(curve.grid[passing[-1]])


def densest_points(embedding_set, count: int) -> np.ndarray:
    """Indices of the points with the most neighbors within the median pairwise distance."""
    sq = _pairwise_sq_dists(embedding_set.vectors)
    n = embedding_set.count
    upper = sq[np.triu_indices(n, k=1)]
    median_sq = float(np.median(upper)) if upper.size else 0.0
    density = (sq <= median_sq).sum(axis=1) - 1
    order = np.lexsort((np.arange(n), -density))
    return np.sort(order[:count])
