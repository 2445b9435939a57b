"""Dynamic coverage-and-margin query selection and per-point radius expansion.

The selection loop greedily maximizes a competence-weighted mix of margin
uncertainty and out-degree rank over a radius graph; after annotation, each
new point receives the largest radius whose predicted-label purity still
clears an adaptive threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import EmbeddingSet
from .errors import ConfigError, PoolInvariantError
from .graph import (
    build_radius_graph,
    covered_set,
    prune_incoming_for_covered,
    prune_outgoing_for_labeled,
)
from .learners import (
    LearnerSpec,
    normalize_unit_interval,
    predict_softmax,
    train_learner,
    uncertainty_scores,
)


@dataclass
class PoolState:
    """Labeled/unlabeled index split plus per-labeled-point radii."""

    labeled: list
    unlabeled: list
    deltas: list

    def validate(self, n, delta_max=None):
        if len(self.deltas) != len(self.labeled):
            raise PoolInvariantError(
                f"{len(self.deltas)} radii for {len(self.labeled)} labeled points"
            )
        lab, unl = set(self.labeled), set(self.unlabeled)
        if lab & unl:
            raise PoolInvariantError("labeled and unlabeled sets overlap")
        if lab | unl != set(range(n)):
            raise PoolInvariantError("labeled and unlabeled must partition the dataset")
        for d in self.deltas:
            if not d > 0:
                raise PoolInvariantError("all radii must be positive")
            if delta_max is not None and d > delta_max:
                raise PoolInvariantError(f"radius {d} exceeds delta_max {delta_max}")


@dataclass(frozen=True)
class DComConfig:
    delta0: float
    delta_max: float = None
    tau_slope: float = 0.2
    tau_intercept: float = 0.4
    logistic_a: float = 0.9
    logistic_k: float = 30.0
    delta_resolution: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.delta0 <= 0:
            raise ConfigError("delta0 must be positive")
        if self.delta_max is None:
            object.__setattr__(self, "delta_max", 2.0 * self.delta0)
        if self.delta0 > self.delta_max:
            raise ConfigError("delta0 must not exceed delta_max")
        if not 0 < self.delta_resolution <= self.delta_max:
            raise ConfigError("delta_resolution must lie in (0, delta_max]")
        if not 0 < self.logistic_a < 1:
            raise ConfigError("logistic_a must lie in (0, 1)")
        if self.logistic_k <= 0:
            raise ConfigError("logistic_k must be positive")


@dataclass(frozen=True)
class QueryResult:
    selected: list
    coverage_before: float
    competence: float
    per_step_scores: list = field(default_factory=list)


def competence_score(coverage_p: float, a: float, k: float) -> float:
    """Logistic growth in the coverage probability; equals 1 at full coverage."""
    if not 0.0 <= coverage_p <= 1.0:
        raise ConfigError(f"coverage {coverage_p} outside [0, 1]")
    if not 0 < a < 1 or k <= 0:
        raise ConfigError("require a in (0,1) and k > 0")
    return float((1.0 + np.exp(-k * (1.0 - a))) / (1.0 + np.exp(-k * (coverage_p - a))))


def compute_tau(coverage_old: float, slope: float, intercept: float) -> float:
    """Adaptive purity threshold, affine in the pre-query coverage."""
    if not 0.0 <= coverage_old <= 1.0:
        raise ConfigError(f"coverage {coverage_old} outside [0, 1]")
    return slope * coverage_old + intercept


def delta_grid(resolution: float, delta_max: float) -> np.ndarray:
    """Positive multiples of the resolution up to delta_max."""
    steps = int(np.floor(delta_max / resolution + 1e-9))
    return resolution * np.arange(1, steps + 1)


def largest_passing_index(size: int, predicate) -> int:
    """Binary search for the last index satisfying a monotone predicate.

    Assumes predicate(i) is non-increasing in i (true ... true false ... false).
    Returns -1 when even index 0 fails.
    """
    if not predicate(0):
        return -1
    lo, hi = 0, size - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if predicate(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def ball_purity_predicted(
    embedding_set, pool: PoolState, predicted_unlabeled, center: int, delta: float
) -> float:
    """Fraction of the center's ball (excluding the center) sharing its label.

    Labeled points contribute their true labels, unlabeled points the model's
    predictions. An empty ball counts as fully pure.
    """
    effective = _effective_labels(embedding_set, pool, predicted_unlabeled)
    points = embedding_set.vectors.astype(np.float64)
    diff = points - points[center]
    inside = (diff * diff).sum(axis=1) <= delta * delta
    inside[center] = False
    total = int(inside.sum())
    if total == 0:
        return 1.0
    matches = int((effective[inside] == effective[center]).sum())
    return matches / total


def _effective_labels(embedding_set, pool, predicted_unlabeled):
    effective = np.full(embedding_set.count, -1, dtype=np.int64)
    labeled = np.asarray(pool.labeled, dtype=np.int64)
    effective[labeled] = embedding_set.labels[labeled]
    unlabeled = np.asarray(pool.unlabeled, dtype=np.int64)
    effective[unlabeled] = np.asarray(predicted_unlabeled, dtype=np.int64)
    return effective


def expand_delta(
    embedding_set,
    pool: PoolState,
    new_points,
    predicted_unlabeled,
    coverage_old: float,
    config: DComConfig,
) -> list:
    """Append a radius for each newly labeled point.

    For each new point, binary search over the resolution grid finds the
    largest radius whose predicted-label purity still exceeds tau; if even the
    smallest grid radius fails, the radius falls back to the resolution.
    The pool must already contain the new points in its labeled list.
    """
    grid = delta_grid(config.delta_resolution, config.delta_max)
    tau = compute_tau(coverage_old, config.tau_slope, config.tau_intercept)
    effective = _effective_labels(embedding_set, pool, predicted_unlabeled)
    points = embedding_set.vectors.astype(np.float64)

    new_deltas = []
    for v in new_points:
        diff = points - points[v]
        sq = (diff * diff).sum(axis=1)
        sq[v] = np.inf  # the center itself never votes

        def pure_enough(i):
            inside = sq <= grid[i] * grid[i]
            total = int(inside.sum())
            if total == 0:
                return True
            return (effective[inside] == effective[v]).sum() / total > tau

        best = largest_passing_index(len(grid), pure_enough)
        new_deltas.append(float(grid[best]) if best >= 0 else float(grid[0]))
    return list(pool.deltas) + new_deltas


def dcom_select(
    embedding_set: EmbeddingSet,
    pool: PoolState,
    margins,
    q: int,
    config: DComConfig,
) -> QueryResult:
    """Greedy selection of q points maximizing the competence-weighted score.

    margins are the normalized top-two softmax gaps over the unlabeled pool
    (all 1 when the labeled pool is empty). Ties break to the lowest index.
    """
    n = embedding_set.count
    pool.validate(n)
    unlabeled = np.asarray(pool.unlabeled, dtype=np.int64)
    if q > unlabeled.size:
        raise PoolInvariantError(f"q={q} exceeds unlabeled pool size {unlabeled.size}")
    margins = np.asarray(margins, dtype=np.float64)
    if margins.shape != unlabeled.shape:
        raise PoolInvariantError("margins must align with the unlabeled pool")

    if pool.labeled:
        coverage = covered_set(embedding_set, pool.labeled, pool.deltas)
        coverage_before = coverage.probability
        competence = competence_score(
            coverage_before, config.logistic_a, config.logistic_k
        )
        delta_avg = float(np.mean(pool.deltas))
    else:
        coverage_before = 0.0
        competence = 0.0
        delta_avg = config.delta0

    graph = build_radius_graph(embedding_set, delta_avg)
    if pool.labeled:
        prune_incoming_for_covered(graph, coverage.covered)
        prune_outgoing_for_labeled(graph, pool.labeled)

    margin_full = np.ones(n)
    margin_full[unlabeled] = margins
    available = np.ones(unlabeled.size, dtype=bool)
    selected, per_step = [], []
    for _ in range(q):
        degrees = graph._out_degree[unlabeled].astype(np.float64)
        top = degrees.max()
        odr = degrees / top if top > 0 else np.zeros_like(degrees)
        scores = competence * (1.0 - margin_full[unlabeled]) + (1.0 - competence) * odr
        masked = np.where(available, scores, -np.inf)
        pick_pos = int(np.argmax(masked))  # argmax returns the lowest index on ties
        pick = int(unlabeled[pick_pos])
        selected.append(pick)
        per_step.append((pick, float(scores[pick_pos])))
        available[pick_pos] = False
        graph.prune_incoming(np.append(graph.ball_members(pick), pick))
        margin_full[pick] = 1.0
    return QueryResult(selected, coverage_before, competence, per_step)


def run_iteration(
    embedding_set: EmbeddingSet,
    pool: PoolState,
    learner_spec: LearnerSpec,
    q: int,
    config: DComConfig,
    learner=None,
):
    """One full active-learning iteration: select, reveal, train, expand.

    Returns (QueryResult, updated pool, trained learner, metrics dict). If no
    learner is supplied and the labeled pool is non-empty, one is trained on
    the current labeled set to produce the margins.
    """
    unlabeled = list(pool.unlabeled)
    labeled_classes = {int(embedding_set.labels[i]) for i in pool.labeled}
    if pool.labeled and len(labeled_classes) >= 2:
        if learner is None:
            pairs = [(i, int(embedding_set.labels[i])) for i in pool.labeled]
            learner = train_learner(embedding_set, pairs, learner_spec)
        probs = predict_softmax(learner, embedding_set, unlabeled)
        margins = normalize_unit_interval(uncertainty_scores(probs, "margin"))
    else:
        # Cold start (empty or single-class labeled pool): margins default to 1.
        margins = np.ones(len(unlabeled))

    result = dcom_select(embedding_set, pool, margins, q, config)

    selected = result.selected
    new_labeled = list(pool.labeled) + selected
    new_unlabeled = [i for i in unlabeled if i not in set(selected)]
    new_pool = PoolState(new_labeled, new_unlabeled, list(pool.deltas))

    pairs = [(i, int(embedding_set.labels[i])) for i in new_labeled]
    new_classes = {y for _, y in pairs}
    if len(new_classes) >= 2:
        new_learner = train_learner(embedding_set, pairs, learner_spec)
        if new_unlabeled:
            probs = predict_softmax(new_learner, embedding_set, new_unlabeled)
            predicted = probs.rows.argmax(axis=1)
        else:
            predicted = np.empty(0, dtype=np.int64)
    else:
        # Single observed class: predict it everywhere until a second appears.
        new_learner = None
        predicted = np.full(len(new_unlabeled), next(iter(new_classes)), dtype=np.int64)

    new_pool.deltas = expand_delta(
        embedding_set, new_pool, selected, predicted, result.coverage_before, config
    )
    deltas = np.asarray(new_pool.deltas)
    metrics = {
        "coverage": result.coverage_before,
        "competence": result.competence,
        "delta_mean": float(deltas.mean()),
        "delta_std": float(deltas.std()),
    }
    return result, new_pool, new_learner, metrics
