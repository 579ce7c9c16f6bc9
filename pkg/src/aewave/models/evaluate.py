"""Metrics, data splits, cross-validated grid search and permutation importance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass(frozen=True)
class Confusion:
    """Counts ``[[tn, fp], [fn, tp]]`` for labels (negative, positive)."""

    matrix: np.ndarray

    @property
    def accuracy(self) -> float:
        total = self.matrix.sum()
        return float(np.trace(self.matrix) / total) if total else 0.0

    @property
    def recall_negative(self) -> float:
        row = self.matrix[0].sum()
        return float(self.matrix[0, 0] / row) if row else 0.0

    @property
    def recall_positive(self) -> float:
        row = self.matrix[1].sum()
        return float(self.matrix[1, 1] / row) if row else 0.0

    def as_dict(self) -> dict:
        return {
            "matrix": self.matrix.tolist(),
            "accuracy": self.accuracy,
            "recall_non_event": self.recall_negative,
            "recall_event": self.recall_positive,
        }


def confusion_matrix(y_true, y_pred, labels=(0, 1)) -> Confusion:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise DataError("label arrays differ in length")
    neg, pos = labels
    m = np.zeros((2, 2), dtype=np.int64)
    for i, a in enumerate((neg, pos)):
        for j, b in enumerate((neg, pos)):
            m[i, j] = np.count_nonzero((y_true == a) & (y_pred == b))
    return Confusion(m)


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    return float(np.mean(y_true == np.asarray(y_pred))) if y_true.size else 0.0


def stratified_split(y, test_frac: float = 0.2, seed: int = 0):
    """Index arrays ``(train, test)`` with each class split in proportion.

    Per class, ``round(test_frac * n_class)`` rows go to the test side, so
    each side's class ratio is within one sample of the whole set's.
    """
    y = np.asarray(y)
    if not 0 < test_frac < 1:
        raise DataError("test_frac must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for lab in np.unique(y):
        idx = np.flatnonzero(y == lab)
        idx = idx[rng.permutation(idx.size)]
        n_test = int(np.floor(test_frac * idx.size + 0.5))
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_kfold(y, n_splits: int = 5, seed: int = 0):
    """List of ``(train, valid)`` index pairs; each class dealt round-robin."""
    y = np.asarray(y)
    if n_splits < 2:
        raise DataError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(y.size, dtype=np.int64)
    offset = 0
    for lab in np.unique(y):
        idx = np.flatnonzero(y == lab)
        idx = idx[rng.permutation(idx.size)]
        fold_of[idx] = (np.arange(idx.size) + offset) % n_splits
        offset += idx.size
    folds = []
    for f in range(n_splits):
        valid = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        folds.append((train, valid))
    return folds


def grid_search_cv(fit, predict, X, y, grid, n_splits: int = 5, seed: int = 0, metric=accuracy):
    """Mean cross-validated score for every parameter dict in ``grid``.

    ``fit(X, y, **params)`` returns a model and ``predict(model, X)`` its
    labels. The best cell is the first one (in grid order) with the highest
    mean score. Returns ``(best_params, scores)``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    folds = stratified_kfold(y, n_splits, seed)
    scores = []
    for params in grid:
        s = [metric(y[va], predict(fit(X[tr], y[tr], **params), X[va])) for tr, va in folds]
        scores.append(float(np.mean(s)))
    best = int(np.argmax(scores))
    return dict(grid[best]), scores


def permutation_importance(predict, X, y, n_repeats: int = 10, seed: int = 0, metric=accuracy):
    """Mean drop of ``metric`` when each column is shuffled.

    Returns ``(importances, baseline)``. Columns are visited in order and
    each draws ``n_repeats`` permutations from a single generator.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    base = metric(y, predict(X))
    imp = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        drops = []
        for _ in range(n_repeats):
            Xp = X.copy()
            Xp[:, j] = X[rng.permutation(X.shape[0]), j]
            drops.append(base - metric(y, predict(Xp)))
        imp[j] = float(np.mean(drops))
    return imp, float(base)
