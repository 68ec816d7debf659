"""Classifiers, evaluation protocols, and metrics.

Logistic regression and the linear SVM are trained with full-batch
gradient descent under a backtracking (Armijo) line search, starting
from zero weights. That makes training deterministic and the recorded
loss curve non-increasing, which the golden tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import StratifiedKFold, train_test_split

MAX_EPOCHS = 500
GRAD_TOL = 1e-5
SVM_L2 = 1e-3


@dataclass(frozen=True)
class Dataset:
    """Feature rows with class labels and subject ids."""

    X: np.ndarray
    y: np.ndarray
    subjects: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y)
        subjects = np.asarray(self.subjects)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X must be finite")
        if y.shape != (X.shape[0],) or subjects.shape != (X.shape[0],):
            raise ValueError("y and subjects must have one entry per row of X")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "subjects", subjects)

    @classmethod
    def from_rows(cls, rows) -> "Dataset":
        features, labels, subjects = zip(*rows)
        return cls(np.array(features), np.array(labels), np.array(subjects))

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, mask) -> "Dataset":
        return Dataset(self.X[mask], self.y[mask], self.subjects[mask])


def concat_datasets(a: Dataset, b: Dataset) -> Dataset:
    if len(b) == 0:
        return a
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return Dataset(
        np.concatenate([a.X, b.X]),
        np.concatenate([a.y, b.y]),
        np.concatenate([a.subjects, b.subjects]),
    )


@dataclass(frozen=True)
class Metrics:
    labels: tuple
    confusion: np.ndarray
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    macro_precision: float
    macro_recall: float
    undefined_precision: tuple = ()
    undefined_recall: tuple = ()

    def to_dict(self) -> dict:
        return {
            "labels": [_plain(l) for l in self.labels],
            "confusion": self.confusion.tolist(),
            "precision": list(self.precision),
            "recall": list(self.recall),
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
        }


def _plain(value):
    return value.item() if isinstance(value, np.generic) else value


def compute_metrics(pairs) -> Metrics:
    """Confusion matrix with per-class and macro precision/recall.

    Rows are true labels, columns predicted. Zero denominators score 0
    and land in the undefined_* flags.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("cannot compute metrics from an empty pair list")
    true = np.array([t for t, _ in pairs])
    pred = np.array([p for _, p in pairs])
    labels = np.unique(np.concatenate([true, pred]))
    index = {label: i for i, label in enumerate(labels)}
    k = labels.size
    confusion = np.zeros((k, k), dtype=np.int64)
    for t, p in pairs:
        confusion[index[t], index[p]] += 1

    diag = np.diag(confusion).astype(float)
    col_sums = confusion.sum(axis=0).astype(float)
    row_sums = confusion.sum(axis=1).astype(float)
    precision = np.divide(diag, col_sums, out=np.zeros(k), where=col_sums > 0)
    recall = np.divide(diag, row_sums, out=np.zeros(k), where=row_sums > 0)
    confusion.setflags(write=False)
    return Metrics(
        labels=tuple(labels.tolist()),
        confusion=confusion,
        precision=tuple(precision.tolist()),
        recall=tuple(recall.tolist()),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        undefined_precision=tuple(labels[col_sums == 0].tolist()),
        undefined_recall=tuple(labels[row_sums == 0].tolist()),
    )


def _check_matrix(X, dim: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected a feature matrix, got shape {X.shape}")
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"expected {dim} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    return X


class _NormalizedClassifier(BaseEstimator, ClassifierMixin):
    """Shared plumbing: per-feature standardization learned in fit."""

    def _fit_normalization(self, X: np.ndarray) -> np.ndarray:
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0.0] = 1.0
        self.scale_ = scale
        return (X - self.mean_) / self.scale_

    def _normalize(self, X: np.ndarray) -> np.ndarray:
        if not hasattr(self, "mean_"):
            raise NotFittedError(f"{type(self).__name__} must be fitted before predicting")
        return (_check_matrix(X, self.mean_.size) - self.mean_) / self.scale_

    def _encode_labels(self, y) -> np.ndarray:
        self.classes_, encoded = np.unique(np.asarray(y), return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("training data must contain at least 2 classes")
        return encoded

    def predict(self, X):
        scores = self.decision_function(X)
        # argmax returns the first maximum, i.e. the lowest class id on ties
        return self.classes_[np.argmax(scores, axis=1)]


def _descend(loss_grad, theta: np.ndarray, max_epochs: int, grad_tol: float):
    """Full-batch gradient descent with a backtracking line search.

    Only steps that satisfy the Armijo decrease condition are accepted,
    so the returned loss history is non-increasing.
    """
    loss, grad = loss_grad(theta)
    history = [loss]
    step = 1.0
    for _ in range(max_epochs):
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < grad_tol:
            break
        accepted = False
        for _ in range(60):
            candidate = theta - step * grad
            cand_loss, cand_grad = loss_grad(candidate)
            if cand_loss <= loss - 0.5 * step * grad_norm ** 2:
                theta, loss, grad = candidate, cand_loss, cand_grad
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        history.append(loss)
        step *= 2.0
    return theta, history


class LogisticRegressionClassifier(_NormalizedClassifier):
    """Multinomial logistic regression trained by gradient descent."""

    def __init__(self, max_epochs: int = MAX_EPOCHS, grad_tol: float = GRAD_TOL, l2: float = 0.0):
        self.max_epochs = max_epochs
        self.grad_tol = grad_tol
        self.l2 = l2

    def fit(self, X, y):
        X = _check_matrix(X)
        encoded = self._encode_labels(y)
        Xn = self._fit_normalization(X)
        n, d = Xn.shape
        k = self.classes_.size
        onehot = np.zeros((n, k))
        onehot[np.arange(n), encoded] = 1.0

        def loss_grad(theta):
            W = theta[: d * k].reshape(d, k)
            b = theta[d * k :]
            logits = Xn @ W + b
            logits -= logits.max(axis=1, keepdims=True)
            exp = np.exp(logits)
            probs = exp / exp.sum(axis=1, keepdims=True)
            nll = -np.mean(np.log(probs[np.arange(n), encoded] + 1e-300))
            loss = nll + self.l2 * float(np.sum(W * W))
            diff = (probs - onehot) / n
            grad_w = Xn.T @ diff + 2 * self.l2 * W
            grad_b = diff.sum(axis=0)
            return loss, np.concatenate([grad_w.ravel(), grad_b])

        theta0 = np.zeros(d * k + k)
        theta, history = _descend(loss_grad, theta0, self.max_epochs, self.grad_tol)
        self.coef_ = theta[: d * k].reshape(d, k)
        self.intercept_ = theta[d * k :]
        self.loss_curve_ = history
        self.n_iter_ = len(history) - 1
        return self

    def decision_function(self, X):
        return self._normalize(X) @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        logits = self.decision_function(X)
        logits -= logits.max(axis=1, keepdims=True)
        exp = np.exp(logits)
        return exp / exp.sum(axis=1, keepdims=True)


class LinearSvmClassifier(_NormalizedClassifier):
    """One-vs-rest linear SVM: hinge loss with an L2 penalty."""

    def __init__(self, l2: float = SVM_L2, max_epochs: int = MAX_EPOCHS, grad_tol: float = GRAD_TOL):
        self.l2 = l2
        self.max_epochs = max_epochs
        self.grad_tol = grad_tol

    def fit(self, X, y):
        X = _check_matrix(X)
        encoded = self._encode_labels(y)
        Xn = self._fit_normalization(X)
        n, d = Xn.shape
        k = self.classes_.size
        targets = -np.ones((n, k))
        targets[np.arange(n), encoded] = 1.0

        def loss_grad(theta):
            W = theta[: d * k].reshape(d, k)
            b = theta[d * k :]
            margins = 1.0 - targets * (Xn @ W + b)
            active = margins > 0
            loss = float(np.maximum(margins, 0.0).sum()) / n + self.l2 * float(np.sum(W * W))
            coeff = np.where(active, -targets, 0.0) / n
            grad_w = Xn.T @ coeff + 2 * self.l2 * W
            grad_b = coeff.sum(axis=0)
            return loss, np.concatenate([grad_w.ravel(), grad_b])

        theta0 = np.zeros(d * k + k)
        theta, history = _descend(loss_grad, theta0, self.max_epochs, self.grad_tol)
        self.coef_ = theta[: d * k].reshape(d, k)
        self.intercept_ = theta[d * k :]
        self.loss_curve_ = history
        self.n_iter_ = len(history) - 1
        return self

    def decision_function(self, X):
        return self._normalize(X) @ self.coef_ + self.intercept_


class KnnClassifier(_NormalizedClassifier):
    """k nearest neighbours on standardized features, Euclidean metric.

    Distance ties resolve by training-row order; vote ties by lowest
    class id.
    """

    def __init__(self, k: int = 5):
        self.k = k

    def fit(self, X, y):
        X = _check_matrix(X)
        encoded = self._encode_labels(y)
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        self.exemplars_ = self._fit_normalization(X)
        self.exemplar_labels_ = encoded
        return self

    def decision_function(self, X):
        Xn = self._normalize(X)
        if not hasattr(self, "exemplars_"):
            raise NotFittedError("KnnClassifier must be fitted before predicting")
        k = min(self.k, self.exemplars_.shape[0])
        d2 = (
            np.sum(Xn ** 2, axis=1)[:, None]
            - 2.0 * Xn @ self.exemplars_.T
            + np.sum(self.exemplars_ ** 2, axis=1)[None, :]
        )
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        votes = np.zeros((Xn.shape[0], self.classes_.size))
        for row, neighbours in enumerate(order):
            votes[row] = np.bincount(
                self.exemplar_labels_[neighbours], minlength=self.classes_.size
            )
        return votes


KINDS = {
    "logreg": LogisticRegressionClassifier,
    "lr": LogisticRegressionClassifier,
    "svm": LinearSvmClassifier,
    "knn": KnnClassifier,
}


def make_classifier(kind: str, **params):
    try:
        return KINDS[kind.lower()](**params)
    except KeyError:
        raise ValueError(f"unknown classifier kind {kind!r}; choose from {sorted(set(KINDS))}")


def _check_trainable(dataset: Dataset, min_per_class: int = 2) -> None:
    labels, counts = np.unique(dataset.y, return_counts=True)
    if labels.size < 2:
        raise ValueError("training data must contain at least 2 distinct labels")
    if counts.min() < min_per_class:
        raise ValueError(f"every class needs at least {min_per_class} samples")


def train(dataset: Dataset, kind: str, **params):
    """Fit a classifier of the given kind on the whole dataset."""
    _check_trainable(dataset)
    return make_classifier(kind, **params).fit(dataset.X, dataset.y)


def predict(model, features):
    """Class id(s) for one feature vector or a matrix of them."""
    features = np.asarray(features, dtype=np.float64)
    single = features.ndim == 1
    out = model.predict(_check_matrix(features))
    return out[0] if single else out


def stratified_folds(y, k: int, seed: int = 0):
    """Deterministic stratified test-index sets covering all rows."""
    splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    return [test for _, test in splitter.split(np.zeros((len(y), 1)), y)]


def kfold_cv(dataset: Dataset, kind: str, k: int = 5, seed: int = 0, **params) -> Metrics:
    """Stratified k-fold cross-validation, metrics over held-out rows."""
    _, counts = np.unique(dataset.y, return_counts=True)
    if counts.min() < k:
        raise ValueError(f"every class needs at least {k} samples for {k}-fold CV")
    pairs = []
    for test_idx in stratified_folds(dataset.y, k, seed):
        mask = np.zeros(len(dataset), dtype=bool)
        mask[test_idx] = True
        model = train(dataset.subset(~mask), kind, **params)
        predictions = model.predict(dataset.X[mask])
        pairs.extend(zip(dataset.y[mask], predictions))
    return compute_metrics(pairs)


def holdout(dataset: Dataset, kind: str, test_fraction: float = 0.2, seed: int = 0, **params) -> Metrics:
    """Stratified holdout split, metrics on the held-out fraction."""
    train_idx, test_idx = train_test_split(
        np.arange(len(dataset)),
        test_size=test_fraction,
        random_state=seed,
        stratify=dataset.y,
    )
    model = train(dataset.subset(train_idx), kind, **params)
    predictions = model.predict(dataset.X[test_idx])
    return compute_metrics(list(zip(dataset.y[test_idx], predictions)))


def leave_one_subject_out(dataset: Dataset, kind: str, **params) -> dict:
    """Per-subject metrics: train on all other subjects, test on one."""
    subjects = np.unique(dataset.subjects)
    if subjects.size < 2:
        raise ValueError("leave-one-subject-out needs at least 2 subjects")
    results = {}
    for subject in subjects:
        held_out = dataset.subjects == subject
        model = train(dataset.subset(~held_out), kind, **params)
        predictions = model.predict(dataset.X[held_out])
        results[_plain(subject)] = compute_metrics(
            list(zip(dataset.y[held_out], predictions))
        )
    return results


def take_personal_samples(dataset: Dataset, subject, n_per_class: int, seed: int = 0):
    """Split one subject's rows into n-per-class personal data and the rest."""
    if n_per_class < 0:
        raise ValueError(f"n_per_class must be >= 0, got {n_per_class}")
    rng = np.random.default_rng(seed)
    own = np.flatnonzero(dataset.subjects == subject)
    personal_idx = []
    for label in np.unique(dataset.y[own]):
        candidates = own[dataset.y[own] == label]
        chosen = rng.permutation(candidates)[:n_per_class]
        personal_idx.extend(chosen.tolist())
    personal_mask = np.zeros(len(dataset), dtype=bool)
    personal_mask[personal_idx] = True
    rest_mask = (dataset.subjects == subject) & ~personal_mask
    return dataset.subset(personal_mask), dataset.subset(rest_mask)


def personalize(base: Dataset, personal: Dataset, kind: str, **params):
    """Retrain on the general data plus a subject's personal samples."""
    return train(concat_datasets(base, personal), kind, **params)


def evaluate_personalization(dataset: Dataset, kind: str, n_per_class: int, seed: int = 0, **params) -> dict:
    """Leave-one-subject-out with n personal samples moved into training."""
    subjects = np.unique(dataset.subjects)
    if subjects.size < 2:
        raise ValueError("personalization evaluation needs at least 2 subjects")
    results = {}
    for subject in subjects:
        base = dataset.subset(dataset.subjects != subject)
        personal, rest = take_personal_samples(dataset, subject, n_per_class, seed)
        model = personalize(base, personal, kind, **params)
        predictions = model.predict(rest.X)
        results[_plain(subject)] = compute_metrics(list(zip(rest.y, predictions)))
    return results
