"""Principal component analysis by thin SVD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass(frozen=True)
class PcaModel:
    """Mean, orthonormal component rows and per-component variance."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray

    def transform(self, X) -> np.ndarray:
        return pca_transform(self, X)

    def inverse_transform(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=np.float64) @ self.components + self.mean

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(*(np.asarray(d[k], dtype=np.float64) for k in
                     ("mean", "components", "explained_variance", "explained_variance_ratio")))


def pca_fit(X, d: int) -> PcaModel:
    """Top-``d`` principal axes of ``X``.

    Variances use the ``n - 1`` denominator. Each component is signed so
    that its largest-magnitude entry is positive, which makes the result
    independent of the SVD routine's sign choice.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("PCA needs a 2-D matrix")
    n, p = X.shape
    if not 1 <= d <= min(n - 1, p):
        raise DataError(f"PCA dimension {d} must lie in [1, {min(n - 1, p)}]")
    mean = X.mean(axis=0)
    _, s, vt = np.linalg.svd(X - mean, full_matrices=False)
    idx = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(vt.shape[0]), idx])
    signs[signs == 0] = 1.0
    vt = vt * signs[:, None]
    var = s**2 / (n - 1)
    total = var.sum()
    ratio = var / total if total > 0 else np.zeros_like(var)
    return PcaModel(mean, vt[:d].copy(), var[:d].copy(), ratio[:d].copy())


def pca_transform(m: PcaModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != m.mean.size:
        raise DataError(f"PCA expects {m.mean.size} columns, got {X.shape[1]}")
    return (X - m.mean) @ m.components.T
