import numpy as np
import pytest

from dcom.data import EmbeddingSet, MixtureSpec, gen_gaussian_mixture
from dcom.errors import DimensionMismatch, SingleClass
from dcom.learners import (
    Learner,
    LearnerSpec,
    SoftmaxMatrix,
    nnn_classify,
    normalize_unit_interval,
    predict_softmax,
    probe_loss_and_grad,
    train_learner,
    uncertainty_scores,
)


def make_pairs(embedding_set, indices):
    return [(int(i), int(embedding_set.labels[i])) for i in indices]


def test_spec_validation():
    with pytest.raises(ValueError):
        LearnerSpec(kind="svm")
    with pytest.raises(ValueError):
        LearnerSpec(learning_rate=0.0)
    with pytest.raises(ValueError):
        LearnerSpec(l2_penalty=-1.0)


def test_softmax_matrix_validation():
    SoftmaxMatrix([[0.5, 0.5]], 2)
    with pytest.raises(ValueError):
        SoftmaxMatrix([[0.5, 0.6]], 2)
    with pytest.raises(ValueError):
        SoftmaxMatrix([[1.2, -0.2]], 2)
    with pytest.raises(ValueError):
        SoftmaxMatrix([[0.5, 0.5]], 3)


def test_single_class_rejected():
    s = EmbeddingSet([[0.0], [1.0]], labels=[0, 0])
    with pytest.raises(SingleClass):
        train_learner(s, make_pairs(s, [0, 1]), LearnerSpec())


def test_probe_separates_well_separated_classes():
    s = gen_gaussian_mixture(MixtureSpec(3, 30, 5, 8.0, 0.5, seed=0))
    learner = train_learner(s, make_pairs(s, range(s.count)), LearnerSpec())
    probs = predict_softmax(learner, s, np.arange(s.count))
    assert (probs.rows.argmax(axis=1) == s.labels).mean() == 1.0


def test_probe_loss_decreases():
    s = gen_gaussian_mixture(MixtureSpec(2, 20, 3, 3.0, 1.0, seed=1))
    learner = train_learner(s, make_pairs(s, range(s.count)), LearnerSpec(epochs=50))
    h = learner.loss_history
    assert len(h) == 50 and h[-1] < h[0]
    assert all(b <= a + 1e-9 for a, b in zip(h, h[1:]))


def test_probe_deterministic():
    s = gen_gaussian_mixture(MixtureSpec(2, 15, 4, 2.0, 1.0, seed=2))
    a = train_learner(s, make_pairs(s, range(s.count)), LearnerSpec())
    b = train_learner(s, make_pairs(s, range(s.count)), LearnerSpec())
    assert np.array_equal(a.weights, b.weights)


def test_probe_gradient_matches_central_differences():
    rng = np.random.default_rng(3)
    m, d, c = 12, 4, 3
    features = np.hstack((rng.normal(size=(m, d)), np.ones((m, 1))))
    onehot = np.zeros((m, c))
    onehot[np.arange(m), rng.integers(0, c, size=m)] = 1.0
    weights = rng.normal(scale=0.5, size=(d + 1, c))
    _, grad = probe_loss_and_grad(weights, features, onehot, 1e-4)
    h = 1e-5
    numeric = np.zeros_like(weights)
    for i in range(d + 1):
        for j in range(c):
            wp, wm = weights.copy(), weights.copy()
            wp[i, j] += h
            wm[i, j] -= h
            lp, _ = probe_loss_and_grad(wp, features, onehot, 1e-4)
            lm, _ = probe_loss_and_grad(wm, features, onehot, 1e-4)
            numeric[i, j] = (lp - lm) / (2 * h)
    rel = np.abs(grad - numeric).max() / max(np.abs(numeric).max(), 1e-12)
    assert rel <= 1e-4


def test_nearest_class_mean_predictions():
    s = EmbeddingSet([[0.0], [0.2], [5.0], [5.2], [0.1], [5.1]], labels=[0, 0, 1, 1, 0, 1])
    learner = train_learner(s, make_pairs(s, [0, 1, 2, 3]), LearnerSpec(kind="nearest_class_mean"))
    assert np.allclose(learner.class_means, [[0.1], [5.1]])
    probs = predict_softmax(learner, s, [4, 5])
    assert probs.rows.argmax(axis=1).tolist() == [0, 1]


def test_ncm_absent_class_gets_zero_probability():
    s = EmbeddingSet([[0.0], [1.0], [2.0]], labels=[0, 2, 1])
    learner = train_learner(s, [(0, 0), (1, 2)], LearnerSpec(kind="nearest_class_mean"))
    probs = predict_softmax(learner, s, [2])
    assert probs.rows[0, 1] == 0.0


def test_predict_dim_mismatch():
    s = EmbeddingSet([[0.0, 1.0], [1.0, 0.0]], labels=[0, 1])
    learner = train_learner(s, make_pairs(s, [0, 1]), LearnerSpec(epochs=5))
    with pytest.raises(DimensionMismatch):
        predict_softmax(learner, EmbeddingSet([[1.0]]), [0])


def test_uncertainty_margin_entropy_maxprob():
    probs = SoftmaxMatrix([[0.7, 0.2, 0.1], [1 / 3, 1 / 3, 1 / 3]], 3)
    margin = uncertainty_scores(probs, "margin")
    assert margin[0] == pytest.approx(0.5)
    assert margin[1] == pytest.approx(0.0)
    entropy = uncertainty_scores(probs, "entropy")
    assert entropy[1] == pytest.approx(np.log(3))
    assert entropy[0] < entropy[1]
    maxprob = uncertainty_scores(probs, "maxprob")
    assert maxprob[0] == pytest.approx(0.3)
    assert maxprob[1] == pytest.approx(2 / 3)


def test_entropy_handles_exact_zeros():
    probs = SoftmaxMatrix([[1.0, 0.0]], 2)
    assert uncertainty_scores(probs, "entropy")[0] == 0.0


def test_gradnorm_requires_probe_handle():
    probs = SoftmaxMatrix([[0.6, 0.4]], 2)
    with pytest.raises(ValueError):
        uncertainty_scores(probs, "gradnorm")
    ncm = Learner(LearnerSpec(kind="nearest_class_mean"), 1, 2)
    with pytest.raises(ValueError):
        uncertainty_scores(probs, "gradnorm", learner=ncm)


def test_gradnorm_values():
    probe = Learner(LearnerSpec(), 1, 2)
    probs = SoftmaxMatrix([[0.6, 0.4], [1.0, 0.0]], 2)
    scores = uncertainty_scores(probs, "gradnorm", learner=probe)
    # ||(0.6-1, 0.4-0)|| = sqrt(0.32)
    assert scores[0] == pytest.approx(np.sqrt(0.32))
    assert scores[1] == pytest.approx(0.0)


def test_unknown_uncertainty_kind():
    probs = SoftmaxMatrix([[0.5, 0.5]], 2)
    with pytest.raises(ValueError):
        uncertainty_scores(probs, "variance")


def test_normalize_unit_interval():
    out = normalize_unit_interval([2.0, 4.0, 6.0])
    assert out.tolist() == [0.0, 0.5, 1.0]
    assert normalize_unit_interval([3.0, 3.0]).tolist() == [0.0, 0.0]
    with pytest.raises(ValueError):
        normalize_unit_interval([])
    with pytest.raises(ValueError):
        normalize_unit_interval([1.0, np.inf])


def test_nnn_classify_radius_weighting():
    s = EmbeddingSet([[0.0], [1.0], [0.4]])
    # Point 2 sits nearer to 0, but point 1 has a much larger radius:
    # d/delta is 0.4/0.5 = 0.8 for label 0, 0.6/2.0 = 0.3 for label 1.
    labeled = [(0, 0), (1, 1)]
    assert nnn_classify(s, labeled, [0.5, 2.0], query=2) == 1
    assert nnn_classify(s, labeled, [0.5, 0.5], query=2) == 0


def test_nnn_classify_tie_lowest_index():
    s = EmbeddingSet([[0.0], [2.0], [1.0]])
    assert nnn_classify(s, [(0, 7), (1, 3)], [1.0, 1.0], query=2) == 7
    with pytest.raises(ValueError):
        nnn_classify(s, [], [], query=2)
