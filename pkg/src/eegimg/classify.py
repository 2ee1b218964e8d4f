"""From-scratch classifiers and evaluation: kNN, softmax regression, RBF-SVM.

All fits are deterministic. kNN breaks distance ties by training-row index
and vote ties by lowest label; softmax regression trains full-batch gradient
descent from zero weights; the SVM trains one-vs-rest binary machines with
simplified sequential minimal optimization on a shared RBF kernel matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .features import FeatureMatrix
from .kernels import smo_solve


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def _check_dense_labels(labels: np.ndarray) -> int:
    """Labels must cover 0..C-1 with every class populated; returns C."""
    present = np.unique(labels)
    if len(present) < 2:
        raise DataError("training data must contain at least 2 classes")
    c = int(present.max()) + 1
    if present.min() < 0 or len(present) != c:
        missing = sorted(set(range(c)) - set(present.tolist()))[:5]
        raise DataError(f"labels must be dense in 0..C-1; missing {missing}")
    return c


def _sq_distances(queries: np.ndarray, train: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances via direct differences, shape (nq, nt)."""
    diff = queries[:, None, :] - train[None, :, :]
    return np.einsum("qtd,qtd->qt", diff, diff)


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * ||a_i - b_j||^2), shape (len(a), len(b)).

    Uses the norm expansion so the (n, m, d) broadcast never materializes.
    """
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


# ---------------------------------------------------------------------------
# k nearest neighbors
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KnnModel:
    train_rows: np.ndarray
    train_labels: np.ndarray
    k: int
    n_classes: int


def knn_fit(train: FeatureMatrix, k: int = 5) -> KnnModel:
    """Store the training matrix; k must not exceed the number of rows."""
    if train.n_samples == 0:
        raise DataError("cannot fit kNN on an empty matrix")
    if not 1 <= k <= train.n_samples:
        raise ConfigError(f"k must be in [1, {train.n_samples}], got {k}")
    if train.labels.min() < 0:
        raise DataError("labels must be nonnegative")
    c = int(train.labels.max()) + 1
    return KnnModel(train_rows=train.rows.copy(), train_labels=train.labels.copy(),
                    k=k, n_classes=c)


def knn_predict(m: KnnModel, x: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Majority label among the k nearest training rows (Euclidean).

    Distance ties prefer the lower training-row index; vote ties the lowest
    label.
    """
    rows = x.rows if isinstance(x, FeatureMatrix) else np.atleast_2d(x)
    if rows.shape[1] != m.train_rows.shape[1]:
        raise DataError(
            f"query width {rows.shape[1]} != training width {m.train_rows.shape[1]}"
        )
    out = np.empty(rows.shape[0], dtype=np.int64)
    # chunked so the (queries x train x d) difference block stays small
    n_train, d = m.train_rows.shape
    chunk = max(1, int(2e7) // max(1, n_train * d))
    for start in range(0, rows.shape[0], chunk):
        block = rows[start:start + chunk]
        d2 = _sq_distances(block, m.train_rows)
        # stable sort keeps ascending training index among equal distances
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :m.k]
        for qi in range(block.shape[0]):
            votes = np.bincount(m.train_labels[nearest[qi]], minlength=m.n_classes)
            out[start + qi] = int(np.argmax(votes))
    return out


# ---------------------------------------------------------------------------
# Softmax regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SoftmaxConfig:
    learning_rate: float = 1e-2
    epochs: int = 500
    l2: float = 1e-4
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")


@dataclass(frozen=True, eq=False)
class SoftmaxModel:
    weights: np.ndarray  # (d+1, C); last row is the bias
    config: SoftmaxConfig
    epochs_run: int
    final_grad_norm: float


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_gradient(w: np.ndarray, xa: np.ndarray, onehot: np.ndarray,
                     l2: float) -> np.ndarray:
    """Gradient of mean cross-entropy + (l2/2)*||W||^2 (bias unpenalized)."""
    p = _softmax_rows(xa @ w)
    grad = xa.T @ (p - onehot) / xa.shape[0]
    grad[:-1] += l2 * w[:-1]
    return grad


def softmax_loss(w: np.ndarray, xa: np.ndarray, onehot: np.ndarray, l2: float) -> float:
    z = xa @ w
    z = z - z.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    ce = -(onehot * log_p).sum(axis=1).mean()
    return float(ce + 0.5 * l2 * (w[:-1] ** 2).sum())


def softmax_fit(train: FeatureMatrix, config: SoftmaxConfig = SoftmaxConfig()) -> SoftmaxModel:
    """Full-batch gradient descent from zero-initialized weights.

    Stops at the epoch limit or when the gradient infinity-norm drops below
    config.tol.
    """
    c = _check_dense_labels(train.labels)
    xa = np.hstack([train.rows, np.ones((train.n_samples, 1))])
    onehot = np.zeros((train.n_samples, c))
    onehot[np.arange(train.n_samples), train.labels] = 1.0
    w = np.zeros((xa.shape[1], c))
    grad_norm = np.inf
    epochs_run = 0
    for _ in range(config.epochs):
        grad = softmax_gradient(w, xa, onehot, config.l2)
        grad_norm = float(np.abs(grad).max())
        if grad_norm < config.tol:
            break
        w = w - config.learning_rate * grad
        epochs_run += 1
    return SoftmaxModel(weights=w, config=config, epochs_run=epochs_run,
                        final_grad_norm=grad_norm)


def softmax_proba(m: SoftmaxModel, x: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Class probability rows (each sums to 1)."""
    rows = x.rows if isinstance(x, FeatureMatrix) else np.atleast_2d(x)
    if rows.shape[1] != m.weights.shape[0] - 1:
        raise DataError(
            f"query width {rows.shape[1]} != model width {m.weights.shape[0] - 1}"
        )
    return _softmax_rows(rows @ m.weights[:-1] + m.weights[-1])


def softmax_predict(m: SoftmaxModel, x: FeatureMatrix | np.ndarray) -> np.ndarray:
    return np.argmax(softmax_proba(m, x), axis=1).astype(np.int64)


# ---------------------------------------------------------------------------
# RBF-SVM (one-vs-rest, simplified SMO)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SvmBinary:
    """One one-vs-rest machine: duals over the shared training set."""

    alpha: np.ndarray
    bias: float
    sweeps: int


@dataclass(frozen=True, eq=False)
class SvmModel:
    support_vectors: np.ndarray  # shared training rows
    target_signs: np.ndarray     # (C, n) entries in {-1, +1}
    machines: tuple[SvmBinary, ...]
    gamma: float
    box_c: float
    n_classes: int


def svm_fit(train: FeatureMatrix, box_c: float = 1.0, gamma: float | None = None,
            tol: float = 1e-3, max_passes: int = 20) -> SvmModel:
    """Train C one-vs-rest binary RBF machines with simplified SMO.

    gamma defaults to 1/n_features. max_passes bounds the number of full
    index sweeps per machine; each machine also stops at the first sweep
    that changes nothing (KKT conditions met within tol for checked pairs).
    """
    c = _check_dense_labels(train.labels)
    if gamma is None:
        gamma = 1.0 / train.n_features
    if gamma <= 0:
        raise ConfigError(f"gamma must be > 0, got {gamma}")
    if box_c <= 0:
        raise ConfigError(f"box constraint must be > 0, got {box_c}")
    kernel = rbf_kernel(train.rows, train.rows, gamma)
    machines = []
    signs = np.empty((c, train.n_samples))
    for cls in range(c):
        y = np.where(train.labels == cls, 1.0, -1.0)
        signs[cls] = y
        alpha, bias, sweeps = smo_solve(kernel, y, box_c, tol, max_passes)
        machines.append(SvmBinary(alpha=np.asarray(alpha), bias=float(bias),
                                  sweeps=int(sweeps)))
    return SvmModel(support_vectors=train.rows.copy(), target_signs=signs,
                    machines=tuple(machines), gamma=gamma, box_c=box_c, n_classes=c)


def svm_decision(m: SvmModel, x: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Per-class decision values, shape (n_queries, C)."""
    rows = x.rows if isinstance(x, FeatureMatrix) else np.atleast_2d(x)
    if rows.shape[1] != m.support_vectors.shape[1]:
        raise DataError(
            f"query width {rows.shape[1]} != training width {m.support_vectors.shape[1]}"
        )
    kernel = rbf_kernel(rows, m.support_vectors, m.gamma)
    out = np.empty((rows.shape[0], m.n_classes))
    for cls, machine in enumerate(m.machines):
        coef = machine.alpha * m.target_signs[cls]
        out[:, cls] = kernel @ coef + machine.bias
    return out


def svm_predict(m: SvmModel, x: FeatureMatrix | np.ndarray) -> np.ndarray:
    """argmax of decision values; ties go to the lowest label."""
    return np.argmax(svm_decision(m, x), axis=1).astype(np.int64)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EvalReport:
    """Accuracy, per-class accuracy, and confusion matrix (rows = true)."""

    accuracy: float
    per_class: tuple[float | None, ...]
    confusion: np.ndarray

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class_accuracy": list(self.per_class),
            "confusion_matrix": self.confusion.tolist(),
        }


def evaluate(predicted: np.ndarray, true: np.ndarray,
             n_classes: int | None = None) -> EvalReport:
    """Accuracy = matches/total; confusion[i][j] = count(true=i, pred=j).

    Per-class accuracy is None for classes with no true samples.
    """
    predicted = np.asarray(predicted, dtype=np.int64)
    true = np.asarray(true, dtype=np.int64)
    if predicted.size == 0 or true.size == 0:
        raise DataError("evaluate needs non-empty label vectors")
    if predicted.shape != true.shape:
        raise DataError(f"length mismatch: {predicted.shape} vs {true.shape}")
    if predicted.min() < 0 or true.min() < 0:
        raise DataError("labels must be nonnegative")
    if n_classes is None:
        n_classes = int(max(predicted.max(), true.max())) + 1
    elif max(predicted.max(), true.max()) >= n_classes:
        raise DataError(
            f"label {int(max(predicted.max(), true.max()))} exceeds n_classes={n_classes}"
        )
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (true, predicted), 1)
    accuracy = float(np.trace(confusion) / len(true))
    per_class: list[float | None] = []
    for i in range(n_classes):
        row_total = confusion[i].sum()
        per_class.append(float(confusion[i, i] / row_total) if row_total else None)
    return EvalReport(accuracy=accuracy, per_class=tuple(per_class),
                      confusion=confusion)


# ---------------------------------------------------------------------------
# Model persistence (JSON with a kind tag)
# ---------------------------------------------------------------------------

def save_model(model, path) -> None:
    """Serialize a fitted model to JSON (f64 values as decimal text)."""
    if isinstance(model, KnnModel):
        doc = {
            "kind": "knn",
            "k": model.k,
            "n_classes": model.n_classes,
            "train_rows": model.train_rows.tolist(),
            "train_labels": model.train_labels.tolist(),
        }
    elif isinstance(model, SoftmaxModel):
        doc = {
            "kind": "softmax",
            "config": {
                "learning_rate": model.config.learning_rate,
                "epochs": model.config.epochs,
                "l2": model.config.l2,
                "tol": model.config.tol,
                "seed": model.config.seed,
            },
            "epochs_run": model.epochs_run,
            "final_grad_norm": model.final_grad_norm,
            "weights": model.weights.tolist(),
        }
    elif isinstance(model, SvmModel):
        doc = {
            "kind": "svm",
            "gamma": model.gamma,
            "box_c": model.box_c,
            "n_classes": model.n_classes,
            "support_vectors": model.support_vectors.tolist(),
            "target_signs": model.target_signs.tolist(),
            "machines": [
                {"alpha": mach.alpha.tolist(), "bias": mach.bias, "sweeps": mach.sweeps}
                for mach in model.machines
            ],
        }
    else:
        raise ConfigError(f"cannot serialize model of type {type(model).__name__}")
    with open(path, "w") as f:
        json.dump(doc, f)


def load_model(path):
    """Inverse of save_model."""
    with open(path) as f:
        doc = json.load(f)
    kind = doc.get("kind")
    if kind == "knn":
        return KnnModel(
            train_rows=np.array(doc["train_rows"], dtype=np.float64),
            train_labels=np.array(doc["train_labels"], dtype=np.int64),
            k=doc["k"],
            n_classes=doc["n_classes"],
        )
    if kind == "softmax":
        return SoftmaxModel(
            weights=np.array(doc["weights"], dtype=np.float64),
            config=SoftmaxConfig(**doc["config"]),
            epochs_run=doc["epochs_run"],
            final_grad_norm=doc["final_grad_norm"],
        )
    if kind == "svm":
        return SvmModel(
            support_vectors=np.array(doc["support_vectors"], dtype=np.float64),
            target_signs=np.array(doc["target_signs"], dtype=np.float64),
            machines=tuple(
                SvmBinary(alpha=np.array(m["alpha"], dtype=np.float64),
                          bias=m["bias"], sweeps=m["sweeps"])
                for m in doc["machines"]
            ),
            gamma=doc["gamma"],
            box_c=doc["box_c"],
            n_classes=doc["n_classes"],
        )
    raise ConfigError(f"unknown model kind {kind!r} in {path}")
