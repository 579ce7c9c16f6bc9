"""Binary RBF support vector machine trained by sequential minimal optimisation.

The dual is solved by :func:`aewave._kernels.smo_solve`, which follows the
second-order working-set selection of Fan, Chen and Lin (2005).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..errors import DataError, NumericalError


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True)
class SvmModel:
    """Support vectors, their dual coefficients ``alpha_i * y_i`` and the bias.

    The decision value is ``f(x) = sum_i coef_i K(sv_i, x) + b``; positive
    values predict the +1 class.
    """

    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    gamma: float
    C: float
    n_iter: int = 0
    kkt_gap: float = 0.0

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if self.support_vectors.shape[0] == 0:
            return np.full(X.shape[0], self.bias)
        return rbf_kernel(X, self.support_vectors, self.gamma) @ self.dual_coef + self.bias

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) > 0, 1, -1)

    def to_dict(self) -> dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": float(self.bias),
            "gamma": float(self.gamma),
            "C": float(self.C),
            "n_iter": int(self.n_iter),
            "kkt_gap": float(self.kkt_gap),
        }

    @classmethod
    def from_dict(cls, d):
        sv = np.asarray(d["support_vectors"], dtype=np.float64)
        return cls(
            sv.reshape(len(d["dual_coef"]), -1) if sv.size else sv.reshape(0, 0),
            np.asarray(d["dual_coef"], dtype=np.float64),
            float(d["bias"]),
            float(d["gamma"]),
            float(d["C"]),
            int(d.get("n_iter", 0)),
            float(d.get("kkt_gap", 0.0)),
        )


def svm_train(
    X,
    y,
    C: float = 1.0,
    gamma: float = 0.01,
    tol: float = 1e-3,
    max_passes: int = 1_000_000,
    class_weight: dict | None = None,
) -> SvmModel:
    """Fit the soft-margin RBF SVM.

    Parameters
    ----------
    X : (n, d) array
    y : (n,) array of -1/+1
    C, gamma : float
        Box constraint and RBF width ``exp(-gamma |a-b|^2)``.
    tol : float
        Stopping threshold on the maximal KKT violation
        ``max_{up}(-y G) - min_{low}(-y G)``.
    max_passes : int
        Cap on SMO pair updates.
    class_weight : dict, optional
        Multipliers of ``C`` per class label, e.g. ``{1: 10.0}``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.size or y.size < 2:
        raise DataError("SVM needs a 2-D matrix with at least 2 labelled rows")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise DataError("SVM labels must be -1 or +1")
    if np.unique(y).size < 2:
        raise DataError("SVM training data must contain both classes")
    if not (C > 0 and gamma > 0):
        raise DataError("C and gamma must be positive")
    cw = class_weight or {}
    c_pos = C * float(cw.get(1, 1.0))
    c_neg = C * float(cw.get(-1, 1.0))
    K = np.ascontiguousarray(rbf_kernel(X, X, gamma))
    alpha, rho, n_iter, gap = _kernels.smo_solve(K, np.ascontiguousarray(y), c_pos, c_neg, tol, max_passes)
    alpha = np.asarray(alpha)
    if not np.all(np.isfinite(alpha)) or not np.isfinite(rho):
        raise NumericalError("SMO produced non-finite multipliers")
    sv = alpha > 0
    return SvmModel(X[sv].copy(), (alpha * y)[sv], -float(rho), float(gamma), float(C), int(n_iter), float(gap))


def svm_predict(m: SvmModel, x):
    """Label in {-1, +1} and decision value."""
    f = m.decision_function(x)
    return np.where(f > 0, 1, -1), f
