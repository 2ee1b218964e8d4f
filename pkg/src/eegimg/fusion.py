"""Multi-modal fusion over feature matrices.

Three strategies: side-by-side concatenation, vertical stacking (rows from
both modalities share one feature space), and a closed-form linear map from
one modality's features to the other's. Also houses subject averaging and
the standard scaler used before classification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .features import FeatureMatrix


@dataclass(frozen=True, eq=False)
class ScalerParams:
    """Per-feature mean and population std learned from a training matrix."""

    mean: np.ndarray
    std: np.ndarray


@dataclass(frozen=True, eq=False)
class RidgeModel:
    """Linear map y ~ x @ weights[:-1] + weights[-1]; bias is unpenalized."""

    weights: np.ndarray
    lam: float


def average_subjects(m: FeatureMatrix, subjects_per_stimulus: int) -> FeatureMatrix:
    """Collapse repeated per-subject rows into one mean row per stimulus.

    Every sample_id must occur exactly subjects_per_stimulus times with a
    consistent label. Output rows are ordered by first appearance.
    """
    if subjects_per_stimulus < 1:
        raise DataError("subjects_per_stimulus must be >= 1")
    order: list[int] = []
    groups: dict[int, list[int]] = {}
    for idx, sid in enumerate(m.sample_ids):
        sid = int(sid)
        if sid not in groups:
            groups[sid] = []
            order.append(sid)
        groups[sid].append(idx)
    rows = np.empty((len(order), m.n_features))
    ids = np.empty(len(order), dtype=np.int64)
    labels = np.empty(len(order), dtype=np.int64)
    for out_i, sid in enumerate(order):
        idxs = groups[sid]
        if len(idxs) != subjects_per_stimulus:
            raise DataError(
                f"stimulus {sid} has {len(idxs)} rows, expected {subjects_per_stimulus}"
            )
        grp_labels = set(int(m.labels[i]) for i in idxs)
        if len(grp_labels) != 1:
            raise DataError(f"stimulus {sid} has conflicting labels {sorted(grp_labels)}")
        rows[out_i] = m.rows[idxs].mean(axis=0)
        ids[out_i] = sid
        labels[out_i] = grp_labels.pop()
    return FeatureMatrix(rows=rows, sample_ids=ids, labels=labels,
                         feature_names=m.feature_names)


def fit_scaler(train: FeatureMatrix) -> ScalerParams:
    """Learn per-column mean and population std from a training matrix."""
    if train.n_samples == 0:
        raise DataError("cannot fit a scaler on an empty matrix")
    return ScalerParams(mean=train.rows.mean(axis=0), std=train.rows.std(axis=0))


def apply_scaler(p: ScalerParams, m: FeatureMatrix) -> FeatureMatrix:
    """Standardize columns with training statistics; constant columns map to 0."""
    if len(p.mean) != m.n_features:
        raise DataError(
            f"scaler was fit on {len(p.mean)} features, matrix has {m.n_features}"
        )
    safe = np.where(p.std > 0, p.std, 1.0)
    rows = np.where(p.std > 0, (m.rows - p.mean) / safe, 0.0)
    return FeatureMatrix(rows=rows, sample_ids=m.sample_ids, labels=m.labels,
                         feature_names=m.feature_names, modality=m.modality)


def _check_aligned(a: FeatureMatrix, b: FeatureMatrix) -> None:
    if a.n_samples != b.n_samples:
        raise DataError(f"row counts differ: {a.n_samples} vs {b.n_samples}")
    if not np.array_equal(a.sample_ids, b.sample_ids):
        raise DataError("sample_ids are not aligned between the two matrices")
    if not np.array_equal(a.labels, b.labels):
        raise DataError("labels are not aligned between the two matrices")


def concat_features(a: FeatureMatrix, b: FeatureMatrix) -> FeatureMatrix:
    """Join two aligned matrices side by side (row i = a_i then b_i)."""
    _check_aligned(a, b)
    return FeatureMatrix(
        rows=np.hstack([a.rows, b.rows]),
        sample_ids=a.sample_ids.copy(),
        labels=a.labels.copy(),
        feature_names=a.feature_names + b.feature_names,
    )


def vstack_features(a: FeatureMatrix, b: FeatureMatrix,
                    tag_a: str = "a", tag_b: str = "b") -> FeatureMatrix:
    """Stack two same-width matrices vertically, tagging row provenance.

    Every sample_id must be present in both matrices.
    """
    if a.n_features != b.n_features:
        raise DataError(
            f"feature widths differ: {a.n_features} vs {b.n_features}"
        )
    if a.n_samples and b.n_samples:  # empty matrix stacks as identity
        ids_a, ids_b = set(a.sample_ids.tolist()), set(b.sample_ids.tolist())
        if ids_a != ids_b:
            missing = sorted(ids_a ^ ids_b)[:5]
            raise DataError(f"sample_ids differ between modalities (e.g. {missing})")
    return FeatureMatrix(
        rows=np.vstack([a.rows, b.rows]),
        sample_ids=np.concatenate([a.sample_ids, b.sample_ids]),
        labels=np.concatenate([a.labels, b.labels]),
        feature_names=a.feature_names,
        modality=(tag_a,) * a.n_samples + (tag_b,) * b.n_samples,
    )


def ridge_fit(x: FeatureMatrix, y: FeatureMatrix, lam: float = 0.0) -> RidgeModel:
    """Least-squares linear map from x-rows to y-rows with L2 penalty lam.

    Minimizes ||X W - Y||^2 + lam ||W||^2 with the bias row unpenalized,
    solved through the normal equations (Cholesky). lam must be > 0 when
    X^T X is singular.
    """
    if x.n_samples != y.n_samples:
        raise DataError(f"row counts differ: {x.n_samples} vs {y.n_samples}")
    if lam < 0:
        raise DataError(f"regularization strength must be >= 0, got {lam}")
    xa = np.hstack([x.rows, np.ones((x.n_samples, 1))])
    gram = xa.T @ xa
    d = x.n_features
    gram[np.arange(d), np.arange(d)] += lam
    rhs = xa.T @ y.rows
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        raise DataError(
            "normal equations are singular; use lam > 0 or more samples"
        ) from None
    w = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
    return RidgeModel(weights=w, lam=lam)


def ridge_predict(m: RidgeModel, x: FeatureMatrix) -> FeatureMatrix:
    """Apply a fitted linear map; ids and labels carry over."""
    d_in = m.weights.shape[0] - 1
    if x.n_features != d_in:
        raise DataError(f"model expects {d_in} features, matrix has {x.n_features}")
    rows = x.rows @ m.weights[:-1] + m.weights[-1]
    return FeatureMatrix(rows=rows, sample_ids=x.sample_ids.copy(),
                         labels=x.labels.copy())


# ---------------------------------------------------------------------------
# Evaluation protocol for vertically stacked models
# ---------------------------------------------------------------------------

def fuse_probabilities(probas: list[np.ndarray]) -> np.ndarray:
    """Average per-modality class probabilities row-wise."""
    if not probas:
        raise DataError("no probability matrices to fuse")
    out = probas[0].astype(np.float64).copy()
    for p in probas[1:]:
        if p.shape != out.shape:
            raise DataError("probability matrices must share a shape")
        out += p
    return out / len(probas)


def fuse_votes(predictions: list[np.ndarray], n_classes: int) -> np.ndarray:
    """Majority vote across modalities; ties go to the lowest label."""
    if not predictions:
        raise DataError("no prediction vectors to fuse")
    stacked = np.stack(predictions, axis=0)
    out = np.empty(stacked.shape[1], dtype=np.int64)
    for i in range(stacked.shape[1]):
        counts = np.bincount(stacked[:, i], minlength=n_classes)
        out[i] = int(np.argmax(counts))
    return out
