import numpy as np
import pytest

from eegimg.errors import DataError
from eegimg.features import FeatureMatrix
from eegimg.fusion import (apply_scaler, average_subjects, concat_features,
                           fit_scaler, fuse_probabilities, fuse_votes, ridge_fit,
                           ridge_predict, vstack_features)


def matrix(rows, ids=None, labels=None, names=()):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    n = rows.shape[0]
    return FeatureMatrix(
        rows=rows,
        sample_ids=np.asarray(ids if ids is not None else np.arange(n)),
        labels=np.asarray(labels if labels is not None else np.zeros(n, dtype=int)),
        feature_names=names,
    )


# ---------------------------------------------------------------------------
# average_subjects
# ---------------------------------------------------------------------------

def test_average_pairs():
    m = matrix([[1.0, 3.0], [3.0, 5.0]], ids=[7, 7], labels=[2, 2])
    out = average_subjects(m, 2)
    np.testing.assert_array_equal(out.rows, [[2.0, 4.0]])
    assert out.sample_ids.tolist() == [7]
    assert out.labels.tolist() == [2]


def test_average_identity_for_one_subject():
    m = matrix([[1.0], [2.0]], ids=[0, 1], labels=[0, 1])
    out = average_subjects(m, 1)
    np.testing.assert_array_equal(out.rows, m.rows)


def test_average_many_stimuli_order():
    # rows interleaved by stimulus; output follows first appearance
    m = matrix([[0.0], [10.0], [2.0], [12.0]], ids=[5, 9, 5, 9], labels=[0, 1, 0, 1])
    out = average_subjects(m, 2)
    assert out.sample_ids.tolist() == [5, 9]
    np.testing.assert_array_equal(out.rows, [[1.0], [11.0]])


def test_average_permutation_invariant_within_group():
    rng = np.random.default_rng(0)
    rows = rng.normal(size=(6, 4))
    a = matrix(rows, ids=[1] * 6, labels=[3] * 6)
    b = matrix(rows[::-1], ids=[1] * 6, labels=[3] * 6)
    np.testing.assert_allclose(average_subjects(a, 6).rows,
                               average_subjects(b, 6).rows, atol=1e-12)


def test_average_unequal_groups_error():
    m = matrix([[1.0], [2.0], [3.0]], ids=[0, 0, 1], labels=[0, 0, 0])
    with pytest.raises(DataError):
        average_subjects(m, 2)


def test_average_conflicting_labels_error():
    m = matrix([[1.0], [2.0]], ids=[0, 0], labels=[0, 1])
    with pytest.raises(DataError):
        average_subjects(m, 2)


# ---------------------------------------------------------------------------
# scaler
# ---------------------------------------------------------------------------

def test_scaler_two_point_column():
    train = matrix([[2.0], [4.0]])
    p = fit_scaler(train)
    out = apply_scaler(p, train)
    np.testing.assert_allclose(out.rows, [[-1.0], [1.0]])


def test_scaler_constant_column_zeros():
    train = matrix([[3.0, 1.0], [3.0, 2.0]])
    out = apply_scaler(fit_scaler(train), train)
    np.testing.assert_array_equal(out.rows[:, 0], [0.0, 0.0])


def test_scaler_train_statistics():
    rng = np.random.default_rng(1)
    train = matrix(rng.normal(3.0, 2.0, size=(50, 6)))
    out = apply_scaler(fit_scaler(train), train)
    np.testing.assert_allclose(out.rows.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(out.rows.std(axis=0), 1.0, atol=1e-9)


def test_scaler_idempotent_on_train():
    rng = np.random.default_rng(2)
    train = matrix(rng.normal(size=(20, 3)))
    once = apply_scaler(fit_scaler(train), train)
    twice = apply_scaler(fit_scaler(once), once)
    np.testing.assert_allclose(twice.rows, once.rows, atol=1e-9)


def test_scaler_width_mismatch_error():
    p = fit_scaler(matrix([[1.0, 2.0]]))
    with pytest.raises(DataError):
        apply_scaler(p, matrix([[1.0, 2.0, 3.0]]))


# ---------------------------------------------------------------------------
# concat / vstack
# ---------------------------------------------------------------------------

def test_concat_widths_add():
    rng = np.random.default_rng(3)
    a = matrix(rng.normal(size=(5, 3)), labels=[0, 1, 0, 1, 0])
    b = matrix(rng.normal(size=(5, 4)), labels=[0, 1, 0, 1, 0])
    out = concat_features(a, b)
    assert out.rows.shape == (5, 7)
    np.testing.assert_array_equal(out.rows[:, :3], a.rows)
    np.testing.assert_array_equal(out.rows[:, 3:], b.rows)


def test_concat_zero_width_identity():
    a = matrix([[1.0, 2.0]])
    b = FeatureMatrix(rows=np.zeros((1, 0)), sample_ids=[0], labels=[0])
    out = concat_features(a, b)
    np.testing.assert_array_equal(out.rows, a.rows)


def test_concat_misaligned_ids_error():
    a = matrix([[1.0]], ids=[0])
    b = matrix([[2.0]], ids=[1])
    with pytest.raises(DataError):
        concat_features(a, b)


def test_concat_slice_recovery():
    rng = np.random.default_rng(4)
    a = matrix(rng.normal(size=(6, 2)))
    b = matrix(rng.normal(size=(6, 5)))
    fused = concat_features(a, b)
    np.testing.assert_array_equal(fused.rows[:, :2], a.rows)
    np.testing.assert_array_equal(fused.rows[:, 2:], b.rows)


def test_vstack_row_counts_add():
    rng = np.random.default_rng(5)
    a = matrix(rng.normal(size=(4, 3)), ids=[0, 1, 2, 3])
    b = matrix(rng.normal(size=(4, 3)), ids=[3, 2, 1, 0])
    out = vstack_features(a, b, tag_a="eeg", tag_b="image")
    assert out.rows.shape == (8, 3)
    assert out.modality == ("eeg",) * 4 + ("image",) * 4


def test_vstack_empty_identity():
    a = matrix([[1.0, 2.0]])
    empty = FeatureMatrix(rows=np.zeros((0, 2)), sample_ids=np.zeros(0, dtype=int),
                          labels=np.zeros(0, dtype=int))
    out = vstack_features(a, empty)
    np.testing.assert_array_equal(out.rows, a.rows)


def test_vstack_width_mismatch_error():
    a = matrix(np.zeros((2, 128)), ids=[0, 1])
    b = matrix(np.zeros((2, 256)), ids=[0, 1])
    with pytest.raises(DataError):
        vstack_features(a, b)


def test_vstack_requires_shared_ids():
    a = matrix([[1.0]], ids=[0])
    b = matrix([[2.0]], ids=[5])
    with pytest.raises(DataError):
        vstack_features(a, b)


# ---------------------------------------------------------------------------
# ridge regression
# ---------------------------------------------------------------------------

def ridge_gd_oracle(x, y, lam, lr=5e-3, iters=200_000, tol=1e-12):
    """Plain gradient descent on ||XW - Y||^2 + lam ||W||^2 (bias free)."""
    xa = np.hstack([x, np.ones((x.shape[0], 1))])
    w = np.zeros((xa.shape[1], y.shape[1]))
    for _ in range(iters):
        resid = xa @ w - y
        grad = 2.0 * xa.T @ resid
        grad[:-1] += 2.0 * lam * w[:-1]
        w_new = w - lr * grad / x.shape[0]
        if np.abs(w_new - w).max() < tol:
            return w_new
        w = w_new
    return w


def test_ridge_exact_recovery():
    rng = np.random.default_rng(6)
    w0 = rng.normal(size=(4, 2))
    b0 = rng.normal(size=2)
    x = matrix(rng.normal(size=(30, 4)))
    y = matrix(x.rows @ w0 + b0)
    model = ridge_fit(x, y, lam=0.0)
    np.testing.assert_allclose(model.weights[:-1], w0, atol=1e-6)
    np.testing.assert_allclose(model.weights[-1], b0, atol=1e-6)
    np.testing.assert_allclose(ridge_predict(model, x).rows, y.rows, atol=1e-6)


def test_ridge_heavy_regularization_limit():
    rng = np.random.default_rng(7)
    x = matrix(rng.normal(size=(40, 3)))
    y = matrix(rng.normal(size=(40, 2)) + 5.0)
    model = ridge_fit(x, y, lam=1e9)
    np.testing.assert_allclose(model.weights[:-1], 0.0, atol=1e-6)
    np.testing.assert_allclose(model.weights[-1], y.rows.mean(axis=0), atol=1e-6)


def test_ridge_matches_gradient_descent_oracle():
    rng = np.random.default_rng(8)
    x = matrix(rng.normal(size=(20, 3)))
    y = matrix(rng.normal(size=(20, 2)))
    for lam in (0.0, 0.5):
        model = ridge_fit(x, y, lam=lam)
        w_oracle = ridge_gd_oracle(x.rows, y.rows, lam)
        pred = ridge_predict(model, x).rows
        pred_oracle = x.rows @ w_oracle[:-1] + w_oracle[-1]
        np.testing.assert_allclose(pred, pred_oracle, atol=1e-4)


def test_ridge_local_optimality_probe():
    rng = np.random.default_rng(9)
    x = matrix(rng.normal(size=(15, 3)))
    y = matrix(rng.normal(size=(15, 2)))
    lam = 0.3
    model = ridge_fit(x, y, lam=lam)

    def objective(w):
        resid = np.hstack([x.rows, np.ones((15, 1))]) @ w - y.rows
        return (resid**2).sum() + lam * (w[:-1] ** 2).sum()

    base = objective(model.weights)
    for i in range(model.weights.shape[0]):
        for j in range(model.weights.shape[1]):
            for delta in (1e-3, -1e-3):
                w = model.weights.copy()
                w[i, j] += delta
                assert objective(w) >= base - 1e-12


def test_ridge_singular_without_regularization():
    rng = np.random.default_rng(10)
    x = matrix(rng.normal(size=(3, 6)))  # n < d: singular normal equations
    y = matrix(rng.normal(size=(3, 2)))
    with pytest.raises(DataError):
        ridge_fit(x, y, lam=0.0)
    ridge_fit(x, y, lam=1e-3)  # regularized solve succeeds


def test_ridge_predict_zero_weight_model():
    rng = np.random.default_rng(11)
    x = matrix(rng.normal(size=(4, 3)))
    from eegimg.fusion import RidgeModel
    bias = np.array([2.0, -1.0])
    w = np.vstack([np.zeros((3, 2)), bias])
    model = RidgeModel(weights=w, lam=0.0)
    pred = ridge_predict(model, x)
    np.testing.assert_allclose(pred.rows, np.tile(bias, (4, 1)))


def test_ridge_predict_width_mismatch():
    rng = np.random.default_rng(12)
    model = ridge_fit(matrix(rng.normal(size=(10, 3))),
                      matrix(rng.normal(size=(10, 2))), lam=0.1)
    with pytest.raises(DataError):
        ridge_predict(model, matrix(rng.normal(size=(5, 4))))


# ---------------------------------------------------------------------------
# fused prediction helpers
# ---------------------------------------------------------------------------

def test_fuse_probabilities_mean():
    a = np.array([[0.8, 0.2], [0.4, 0.6]])
    b = np.array([[0.6, 0.4], [0.2, 0.8]])
    np.testing.assert_allclose(fuse_probabilities([a, b]),
                               [[0.7, 0.3], [0.3, 0.7]])


def test_fuse_votes_majority_and_tie():
    preds = [np.array([0, 1, 2]), np.array([0, 2, 2]), np.array([1, 1, 0])]
    out = fuse_votes(preds, n_classes=3)
    np.testing.assert_array_equal(out, [0, 1, 2])
    # 2-way tie between labels 0 and 1 resolves to 0
    tie = fuse_votes([np.array([1]), np.array([0])], n_classes=2)
    assert tie[0] == 0
