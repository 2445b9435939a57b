"""Classical query-selection strategies: random, uncertainty, k-center, max-coverage."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PoolInvariantError
from .graph import build_radius_graph, covered_set, prune_outgoing_for_labeled
from .learners import SoftmaxMatrix, uncertainty_scores

STRATEGY_KINDS = (
    "random",
    "margin",
    "entropy",
    "maxprob",
    "coreset",
    "probcover",
    "dcom",
)


@dataclass(frozen=True)
class StrategySpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")


def _check_budget(pool, q):
    if q > len(pool.unlabeled):
        raise PoolInvariantError(
            f"q={q} exceeds unlabeled pool size {len(pool.unlabeled)}"
        )


def select_random(pool, q: int, seed: int) -> list:
    """q distinct indices drawn uniformly without replacement, seeded."""
    _check_budget(pool, q)
    rng = np.random.default_rng(seed)
    picks = rng.choice(np.asarray(pool.unlabeled, dtype=np.int64), size=q, replace=False)
    return [int(i) for i in picks]


def select_by_uncertainty(pool, probs: SoftmaxMatrix, kind: str, q: int) -> list:
    """The q most-uncertain unlabeled points; ties break to the lowest index."""
    _check_budget(pool, q)
    unlabeled = np.asarray(pool.unlabeled, dtype=np.int64)
    if probs.rows.shape[0] != unlabeled.size:
        raise PoolInvariantError("softmax rows must align with the unlabeled pool")
    scores = uncertainty_scores(probs, kind)
    if kind == "margin":
        keys = scores  # lowest gap first
    else:
        keys = -scores  # highest entropy / maxprob first
    order = np.lexsort((unlabeled, keys))
    return [int(unlabeled[i]) for i in order[:q]]


def select_coreset(embedding_set, pool, q: int) -> list:
    """Greedy k-center: repeatedly take the point farthest from the selected/labeled set."""
    _check_budget(pool, q)
    unlabeled = np.asarray(pool.unlabeled, dtype=np.int64)
    points = embedding_set.vectors.astype(np.float64)
    min_sq = np.full(unlabeled.size, np.inf)
    for i in pool.labeled:
        diff = points[unlabeled] - points[i]
        min_sq = np.minimum(min_sq, (diff * diff).sum(axis=1))

    selected = []
    available = np.ones(unlabeled.size, dtype=bool)
    for _ in range(q):
        if np.isinf(min_sq).all():
            # Empty labeled set: declared convention, start from the lowest index.
            pos = int(np.argmax(available))
        else:
            masked = np.where(available, min_sq, -np.inf)
            pos = int(np.argmax(masked))
        pick = int(unlabeled[pos])
        selected.append(pick)
        available[pos] = False
        diff = points[unlabeled] - points[pick]
        min_sq = np.minimum(min_sq, (diff * diff).sum(axis=1))
    return selected


def select_probcover(embedding_set, pool, delta0: float, q: int) -> list:
    """Greedy max-out-degree at a fixed radius (coverage-only selection)."""
    _check_budget(pool, q)
    unlabeled = np.asarray(pool.unlabeled, dtype=np.int64)
    graph = build_radius_graph(embedding_set, delta0)
    if pool.labeled:
        coverage = covered_set(
            embedding_set, pool.labeled, [delta0] * len(pool.labeled)
        )
        graph.prune_incoming(np.flatnonzero(coverage.covered))
        prune_outgoing_for_labeled(graph, pool.labeled)

    selected = []
    available = np.ones(unlabeled.size, dtype=bool)
    for _ in range(q):
        degrees = graph._out_degree[unlabeled].astype(np.float64)
        masked = np.where(available, degrees, -np.inf)
        pos = int(np.argmax(masked))
        pick = int(unlabeled[pos])
        selected.append(pick)
        available[pos] = False
        graph.prune_incoming(np.append(graph.ball_members(pick), pick))
    return selected
