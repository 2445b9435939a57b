"""Desk-scale classifiers with softmax outputs, uncertainty scores, nNN rule.

Two learner kinds are provided: a multinomial logistic regression trained by
full-batch gradient descent (linear_probe) and a nearest-class-mean classifier
whose softmax is taken over negative distances scaled by a temperature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import EmbeddingSet
from .errors import DimensionMismatch, SingleClass

LEARNER_KINDS = ("linear_probe", "nearest_class_mean")
UNCERTAINTY_KINDS = ("margin", "entropy", "maxprob", "gradnorm")


@dataclass(frozen=True)
class LearnerSpec:
    kind: str = "linear_probe"
    learning_rate: float = 0.1
    epochs: int = 300
    l2_penalty: float = 1e-4
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if self.learning_rate <= 0 or self.epochs <= 0 or self.temperature <= 0:
            raise ValueError("learning_rate, epochs and temperature must be positive")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be non-negative")


@dataclass(frozen=True)
class SoftmaxMatrix:
    """Per-point class-probability rows."""

    rows: np.ndarray
    class_count: int

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self.class_count:
            raise ValueError(f"rows must be (m, {self.class_count})")
        if rows.size:
            if rows.min() < 0 or rows.max() > 1:
                raise ValueError("probabilities must lie in [0, 1]")
            if np.abs(rows.sum(axis=1) - 1.0).max() > 1e-6:
                raise ValueError("rows must sum to 1 within 1e-6")
        object.__setattr__(self, "rows", rows)


class Learner:
    """Trained handle; immutable after construction."""

    def __init__(self, spec, dim, class_count, weights=None, class_means=None):
        self.spec = spec
        self.dim = dim
        self.class_count = class_count
        self.weights = weights  # (dim + 1, C) with bias row, linear probe only
        self.class_means = class_means  # (C, dim), nearest-class-mean only
        self.loss_history = None


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def probe_loss_and_grad(weights, features_bias, onehot, l2_penalty):
    """Mean cross-entropy with L2 on the weights, and its exact gradient.

    features_bias is (m, d+1) with the constant column appended; the bias row
    of the weights is excluded from the penalty.
    """
    m = features_bias.shape[0]
    probs = _softmax(features_bias @ weights)
    eps = 1e-12
    ce = -np.log(probs[np.arange(m), onehot.argmax(axis=1)] + eps).mean()
    penalized = weights.copy()
    penalized[-1] = 0.0
    loss = ce + 0.5 * l2_penalty * (penalized * penalized).sum()
    grad = features_bias.T @ (probs - onehot) / m + l2_penalty * penalized
    return loss, grad


def train_learner(embedding_set: EmbeddingSet, labeled, spec: LearnerSpec) -> Learner:
    """Fit on (index, label) pairs; deterministic per (data, spec)."""
    indices = np.array([i for i, _ in labeled], dtype=np.int64)
    labels = np.array([y for _, y in labeled], dtype=np.int64)
    if np.unique(labels).size < 2:
        raise SingleClass("training requires at least two distinct labels")
    class_count = max(embedding_set.num_classes, int(labels.max()) + 1)
    features = embedding_set.vectors[indices].astype(np.float64)
    learner = Learner(spec, embedding_set.dim, class_count)

    if spec.kind == "nearest_class_mean":
        means = np.full((class_count, embedding_set.dim), np.nan)
        for c in np.unique(labels):
            means[c] = features[labels == c].mean(axis=0)
        learner.class_means = means
        return learner

    features_bias = np.hstack((features, np.ones((features.shape[0], 1))))
    onehot = np.zeros((features.shape[0], class_count))
    onehot[np.arange(features.shape[0]), labels] = 1.0
    weights = np.zeros((embedding_set.dim + 1, class_count))
    history = []
    for _ in range(spec.epochs):
        loss, grad = probe_loss_and_grad(weights, features_bias, onehot, spec.l2_penalty)
        history.append(loss)
        weights = weights - spec.learning_rate * grad
    learner.weights = weights
    learner.loss_history = history
    return learner


def predict_softmax(learner: Learner, embedding_set, targets) -> SoftmaxMatrix:
    targets = np.asarray(targets, dtype=np.int64)
    if embedding_set.dim != learner.dim:
        raise DimensionMismatch(
            f"learner expects dim {learner.dim}, got {embedding_set.dim}"
        )
    features = embedding_set.vectors[targets].astype(np.float64)
    if learner.spec.kind == "linear_probe":
        features_bias = np.hstack((features, np.ones((features.shape[0], 1))))
        rows = _softmax(features_bias @ learner.weights)
    else:
        logits = np.full((features.shape[0], learner.class_count), -np.inf)
        for c in range(learner.class_count):
            if not np.isnan(learner.class_means[c]).any():
                diff = features - learner.class_means[c]
                logits[:, c] = -np.sqrt((diff * diff).sum(axis=1)) / learner.spec.temperature
        rows = _softmax(logits)
    return SoftmaxMatrix(rows, learner.class_count)


def uncertainty_scores(probs: SoftmaxMatrix, kind: str, learner=None) -> np.ndarray:
    """Per-row uncertainty inputs; interpretation depends on kind.

    margin: top-two probability gap (LOWER means more uncertain).
    entropy: -sum p ln p in nats (higher = more uncertain).
    maxprob: 1 - max p (higher = more uncertain).
    gradnorm: L2 norm of the cross-entropy gradient at the output layer with
      the argmax taken as pseudo-label (higher = more uncertain).
    """
    if kind not in UNCERTAINTY_KINDS:
        raise ValueError(f"unknown uncertainty kind {kind!r}")
    rows = probs.rows
    if kind == "margin":
        top2 = np.sort(rows, axis=1)[:, -2:]
        return top2[:, 1] - top2[:, 0]
    if kind == "entropy":
        safe = np.where(rows > 0, rows, 1.0)
        return -(rows * np.log(safe)).sum(axis=1)
    if kind == "maxprob":
        return 1.0 - rows.max(axis=1)
    if learner is None or learner.spec.kind != "linear_probe":
        raise ValueError("gradnorm requires a linear-probe learner handle")
    onehot = np.zeros_like(rows)
    onehot[np.arange(rows.shape[0]), rows.argmax(axis=1)] = 1.0
    diff = rows - onehot
    return np.sqrt((diff * diff).sum(axis=1))


def normalize_unit_interval(scores) -> np.ndarray:
    """Min-max map onto [0, 1]; constant input maps to all zeros."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("scores must be non-empty")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    lo, hi = scores.min(), scores.max()
    if hi == lo:
        return np.zeros_like(scores)
    return (scores - lo) / (hi - lo)


def nnn_classify(embedding_set, labeled, deltas, query: int) -> int:
    """Label of argmin over labeled points of distance / radius (lowest index on ties)."""
    if not len(labeled):
        raise ValueError("labeled set must be non-empty")
    deltas = np.asarray(deltas, dtype=np.float64)
    indices = np.array([i for i, _ in labeled], dtype=np.int64)
    points = embedding_set.vectors.astype(np.float64)
    diff = points[indices] - points[query]
    ratios = np.sqrt((diff * diff).sum(axis=1)) / deltas
    return int(labeled[int(np.argmin(ratios))][1])
