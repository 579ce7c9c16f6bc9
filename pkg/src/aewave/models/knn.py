"""Brute-force k-nearest-neighbour classifier."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass(frozen=True)
class KnnModel:
    """Training rows (already standardised), their integer labels and ``k``."""

    X: np.ndarray
    y: np.ndarray
    k: int

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] != y.size:
            raise DataError("KNN training matrix and labels disagree in length")
        if not 1 <= self.k <= X.shape[0]:
            raise DataError(f"k={self.k} must lie in [1, {X.shape[0]}]")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def predict(self, Q) -> np.ndarray:
        return knn_predict(self, Q)

    def to_dict(self) -> dict:
        return {"k": int(self.k), "X": self.X.tolist(), "y": self.y.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["X"], dtype=np.float64), np.asarray(d["y"]), int(d["k"]))


def knn_fit(X, y, k: int) -> KnnModel:
    return KnnModel(X, y, int(k))


def _pairwise_dist(Q, X):
    # exact differences rather than the |a|^2 - 2ab + |b|^2 expansion, so
    # equal points give a distance of exactly zero
    d = Q[:, None, :] - X[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", d, d))


def knn_predict(m: KnnModel, Q, block: int | None = None) -> np.ndarray:
    """Majority vote of the ``k`` nearest training rows.

    Neighbours are ranked by Euclidean distance with the training row index
    as the secondary key. A tied vote goes to the label whose neighbours have
    the smaller summed distance, and then to the lower label.
    """
    Q = np.asarray(Q, dtype=np.float64)
    single = Q.ndim == 1
    if single:
        Q = Q[None, :]
    if Q.shape[1] != m.X.shape[1]:
        raise DataError(f"query has {Q.shape[1]} features, model expects {m.X.shape[1]}")
    if block is None:
        # keep the (block, n_train, d) difference array near 2**24 entries
        block = max(1, (1 << 24) // max(1, m.X.shape[0] * m.X.shape[1]))
    labels = np.unique(m.y)
    out = np.empty(Q.shape[0], dtype=np.int64)
    for s in range(0, Q.shape[0], block):
        D = _pairwise_dist(Q[s : s + block], m.X)
        order = np.argsort(D, axis=1, kind="stable")[:, : m.k]
        for r in range(D.shape[0]):
            nb = order[r]
            nl = m.y[nb]
            nd = D[r, nb]
            best = None
            for lab in labels:
                sel = nl == lab
                key = (-int(sel.sum()), float(nd[sel].sum()), int(lab))
                if best is None or key < best:
                    best = key
            out[s + r] = best[2]
    return out[0:1] if single else out
