import math
from collections import Counter

import numpy as np
import pytest

from eegimg.classify import (SoftmaxConfig, SoftmaxModel, evaluate, knn_fit,
                             knn_predict, load_model, save_model, softmax_fit,
                             softmax_gradient, softmax_loss, softmax_predict,
                             softmax_proba, svm_decision, svm_fit, svm_predict)
from eegimg.errors import ConfigError, DataError
from eegimg.features import FeatureMatrix


def matrix(rows, labels, ids=None):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    return FeatureMatrix(rows=rows,
                         sample_ids=ids if ids is not None else np.arange(rows.shape[0]),
                         labels=np.asarray(labels))


def blobs(rng, centers, per_class, spread=0.5):
    rows = np.vstack([rng.normal(c, spread, size=(per_class, len(c)))
                      for c in centers])
    labels = np.repeat(np.arange(len(centers)), per_class)
    return matrix(rows, labels)


# ---------------------------------------------------------------------------
# kNN
# ---------------------------------------------------------------------------

def knn_oracle(train_rows, train_labels, queries, k):
    """Exhaustive scan with explicit tie rules, independent of the library."""
    preds = []
    for q in queries:
        dists = []
        for idx, row in enumerate(train_rows):
            diff = row - q
            dists.append((float(np.dot(diff, diff)), idx))
        dists.sort()  # ties resolve to the lower training index
        votes = Counter(int(train_labels[idx]) for _, idx in dists[:k])
        best = max(votes.items(), key=lambda kv: (kv[1], -kv[0]))
        preds.append(best[0])
    return np.array(preds)


def test_knn_exact_training_point():
    train = matrix([[0.0, 0.0], [5.0, 5.0]], labels=[1, 0])
    model = knn_fit(train, k=1)
    assert knn_predict(model, np.array([[5.0, 5.0]]))[0] == 0


def test_knn_majority_of_three():
    train = matrix([[1.0], [2.0], [3.0]], labels=[0, 0, 1])  # distances 1, 2, 3
    model = knn_fit(train, k=3)
    assert knn_predict(model, np.array([[0.0]]))[0] == 0


def test_knn_distance_tie_prefers_lower_index():
    train = matrix([[0.0], [2.0]], labels=[1, 0])
    model = knn_fit(train, k=1)
    # query at 1.0 is equidistant; row 0 wins
    assert knn_predict(model, np.array([[1.0]]))[0] == 1


def test_knn_vote_tie_prefers_lower_label():
    train = matrix([[0.0], [2.0]], labels=[1, 0])
    model = knn_fit(train, k=2)
    assert knn_predict(model, np.array([[1.0]]))[0] == 0


def test_knn_matches_oracle_on_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(5, 200))
        d = int(rng.integers(1, 16))
        train = matrix(rng.normal(size=(n, d)), labels=rng.integers(0, 4, size=n))
        queries = rng.normal(size=(int(rng.integers(1, 20)), d))
        for k in (1, 3, 5, int(rng.integers(1, n + 1))):
            if k > n:
                continue
            model = knn_fit(train, k=k)
            got = knn_predict(model, queries)
            want = knn_oracle(train.rows, train.labels, queries, k)
            np.testing.assert_array_equal(got, want)


def test_knn_k_bounds():
    train = matrix([[0.0], [1.0]], labels=[0, 1])
    with pytest.raises(ConfigError):
        knn_fit(train, k=3)
    with pytest.raises(ConfigError):
        knn_fit(train, k=0)


# ---------------------------------------------------------------------------
# softmax regression
# ---------------------------------------------------------------------------

def test_softmax_zero_weights_uniform():
    model = SoftmaxModel(weights=np.zeros((4, 5)), config=SoftmaxConfig(),
                         epochs_run=0, final_grad_norm=np.inf)
    proba = softmax_proba(model, np.random.default_rng(1).normal(size=(6, 3)))
    np.testing.assert_allclose(proba, np.full((6, 5), 0.2), atol=1e-12)


def test_softmax_separable_blobs():
    rng = np.random.default_rng(2)
    train = blobs(rng, [(-4.0, 0.0), (4.0, 0.0)], per_class=25)
    model = softmax_fit(train, SoftmaxConfig(learning_rate=0.5, epochs=300))
    acc = (softmax_predict(model, train) == train.labels).mean()
    assert acc == 1.0


def test_softmax_proba_rows_sum_to_one():
    rng = np.random.default_rng(3)
    train = blobs(rng, [(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)], per_class=10)
    model = softmax_fit(train, SoftmaxConfig(epochs=50))
    proba = softmax_proba(model, train)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-9)


def finite_difference_gradient(w, xa, onehot, l2, h=1e-5):
    grad = np.zeros_like(w)
    for i in range(w.shape[0]):
        for j in range(w.shape[1]):
            wp, wm = w.copy(), w.copy()
            wp[i, j] += h
            wm[i, j] -= h
            grad[i, j] = (softmax_loss(wp, xa, onehot, l2)
                          - softmax_loss(wm, xa, onehot, l2)) / (2 * h)
    return grad


def test_softmax_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(5):
        n, d, c = 12, 4, 3
        xa = np.hstack([rng.normal(size=(n, d)), np.ones((n, 1))])
        labels = rng.integers(0, c, size=n)
        onehot = np.zeros((n, c))
        onehot[np.arange(n), labels] = 1.0
        w = rng.normal(scale=0.5, size=(d + 1, c))
        analytic = softmax_gradient(w, xa, onehot, l2=1e-3)
        numeric = finite_difference_gradient(w, xa, onehot, l2=1e-3)
        rel = np.abs(analytic - numeric).max() / max(1.0, np.abs(numeric).max())
        worst = max(worst, rel)
    assert worst < 1e-5


def test_softmax_loss_non_increasing():
    rng = np.random.default_rng(5)
    train = blobs(rng, [(0.0, 0.0), (2.0, 2.0)], per_class=20)
    # standard-scaled data, lr=1e-2: loss must decrease monotonically
    rows = (train.rows - train.rows.mean(axis=0)) / train.rows.std(axis=0)
    xa = np.hstack([rows, np.ones((rows.shape[0], 1))])
    onehot = np.zeros((rows.shape[0], 2))
    onehot[np.arange(rows.shape[0]), train.labels] = 1.0
    w = np.zeros((3, 2))
    losses = []
    for _ in range(200):
        losses.append(softmax_loss(w, xa, onehot, 1e-4))
        w = w - 1e-2 * softmax_gradient(w, xa, onehot, 1e-4)
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_softmax_shift_invariance():
    rng = np.random.default_rng(6)
    train = blobs(rng, [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)], per_class=8)
    model = softmax_fit(train, SoftmaxConfig(epochs=100))
    w2 = model.weights.copy()
    w2[-1] += 3.7  # same constant added to every class decision value
    shifted = SoftmaxModel(weights=w2, config=model.config,
                           epochs_run=model.epochs_run,
                           final_grad_norm=model.final_grad_norm)
    np.testing.assert_array_equal(softmax_predict(model, train),
                                  softmax_predict(shifted, train))


def test_softmax_rejects_non_dense_labels():
    m = matrix([[0.0], [1.0], [2.0]], labels=[0, 2, 2])
    with pytest.raises(DataError, match="dense"):
        softmax_fit(m)


def test_softmax_deterministic():
    rng = np.random.default_rng(7)
    train = blobs(rng, [(0.0, 0.0), (3.0, 3.0)], per_class=10)
    m1 = softmax_fit(train, SoftmaxConfig(epochs=50))
    m2 = softmax_fit(train, SoftmaxConfig(epochs=50))
    np.testing.assert_array_equal(m1.weights, m2.weights)


# ---------------------------------------------------------------------------
# SVM
# ---------------------------------------------------------------------------

def test_svm_separable_large_c():
    rng = np.random.default_rng(8)
    train = blobs(rng, [(-3.0, 0.0), (3.0, 0.0)], per_class=20, spread=0.4)
    model = svm_fit(train, box_c=100.0)
    assert (svm_predict(model, train) == train.labels).mean() == 1.0


def test_svm_xor_rbf():
    x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    train = matrix(x, labels=y)
    model = svm_fit(train, box_c=10.0, gamma=1.0)
    np.testing.assert_array_equal(svm_predict(model, train), y)
    # verify the decision values against direct kernel expansion
    decision = svm_decision(model, train)
    for cls, machine in enumerate(model.machines):
        for qi, q in enumerate(x):
            val = machine.bias
            for idx, sv in enumerate(model.support_vectors):
                k = math.exp(-1.0 * float(((q - sv) ** 2).sum()))
                val += machine.alpha[idx] * model.target_signs[cls, idx] * k
            assert abs(val - decision[qi, cls]) < 1e-9


def test_svm_duals_within_box():
    rng = np.random.default_rng(9)
    train = blobs(rng, [(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)], per_class=15,
                  spread=0.8)
    c = 2.5
    model = svm_fit(train, box_c=c)
    for machine in model.machines:
        assert (machine.alpha >= 0.0).all()
        assert (machine.alpha <= c).all()


def test_svm_deterministic():
    rng = np.random.default_rng(10)
    train = blobs(rng, [(0.0, 0.0), (2.0, 2.0)], per_class=12)
    m1 = svm_fit(train)
    m2 = svm_fit(train)
    for a, b in zip(m1.machines, m2.machines):
        np.testing.assert_array_equal(a.alpha, b.alpha)
        assert a.bias == b.bias


def test_svm_rejects_missing_class():
    m = matrix([[0.0], [1.0]], labels=[0, 2])
    with pytest.raises(DataError):
        svm_fit(m)


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def test_evaluate_perfect():
    r = evaluate(np.array([0, 1, 2]), np.array([0, 1, 2]))
    assert r.accuracy == 1.0
    np.testing.assert_array_equal(r.confusion, np.eye(3, dtype=int))
    assert r.per_class == (1.0, 1.0, 1.0)


def test_evaluate_hand_counted():
    r = evaluate(np.array([0, 1, 1, 1]), np.array([0, 0, 1, 1]))
    assert r.accuracy == 0.75
    np.testing.assert_array_equal(r.confusion, [[1, 1], [0, 2]])
    assert r.per_class == (0.5, 1.0)


def test_evaluate_empty_errors():
    with pytest.raises(DataError):
        evaluate(np.array([]), np.array([]))


def test_evaluate_length_mismatch():
    with pytest.raises(DataError):
        evaluate(np.array([0]), np.array([0, 1]))


def test_evaluate_trace_identity():
    rng = np.random.default_rng(11)
    for _ in range(10):
        n = int(rng.integers(1, 50))
        c = int(rng.integers(2, 6))
        true = rng.integers(0, c, size=n)
        pred = rng.integers(0, c, size=n)
        r = evaluate(pred, true, n_classes=c)
        assert r.accuracy == np.trace(r.confusion) / n
        np.testing.assert_array_equal(r.confusion.sum(axis=1),
                                      np.bincount(true, minlength=c))


def test_evaluate_absent_class_per_class_none():
    r = evaluate(np.array([0, 0]), np.array([0, 0]), n_classes=3)
    assert r.per_class[0] == 1.0
    assert r.per_class[1] is None and r.per_class[2] is None


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def test_save_load_round_trip_all_kinds(tmp_path):
    rng = np.random.default_rng(12)
    train = blobs(rng, [(0.0, 0.0), (3.0, 3.0)], per_class=10)
    queries = rng.normal(1.5, 2.0, size=(8, 2))
    models = {
        "knn": knn_fit(train, k=3),
        "softmax": softmax_fit(train, SoftmaxConfig(epochs=40)),
        "svm": svm_fit(train),
    }
    predict = {
        "knn": knn_predict,
        "softmax": softmax_predict,
        "svm": svm_predict,
    }
    for kind, model in models.items():
        path = tmp_path / f"{kind}.json"
        save_model(model, path)
        loaded = load_model(path)
        np.testing.assert_array_equal(predict[kind](model, queries),
                                      predict[kind](loaded, queries))
