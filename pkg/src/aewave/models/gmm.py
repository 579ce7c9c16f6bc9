"""Full-covariance Gaussian mixtures fitted by expectation maximisation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ..errors import DataError, NumericalError

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood_trace: tuple = field(default_factory=tuple)
    converged: bool = True
    n_iter: int = 0
    reg_covar: float = 1e-6

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    def log_likelihood(self, X) -> float:
        """Total log-likelihood ``sum_n log p(x_n)``."""
        return float(np.sum(logsumexp(_weighted_log_prob(self, X), axis=1)))

    def predict_proba(self, X) -> np.ndarray:
        return gmm_responsibilities(self, X)

    def predict(self, X) -> np.ndarray:
        return np.argmax(_weighted_log_prob(self, X), axis=1)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances.tolist(),
            "log_likelihood_trace": list(self.log_likelihood_trace),
            "converged": bool(self.converged),
            "n_iter": int(self.n_iter),
            "reg_covar": float(self.reg_covar),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["weights"], dtype=np.float64),
            np.asarray(d["means"], dtype=np.float64),
            np.asarray(d["covariances"], dtype=np.float64),
            tuple(d.get("log_likelihood_trace", ())),
            bool(d.get("converged", True)),
            int(d.get("n_iter", 0)),
            float(d.get("reg_covar", 1e-6)),
        )


def _cholesky(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("covariance is not positive definite after regularisation") from exc


def _log_gauss(X, mean, cov):
    L = _cholesky(cov)
    z = np.linalg.solve(L, (X - mean).T)
    maha = np.einsum("ij,ij->j", z, z)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (X.shape[1] * _LOG_2PI + logdet + maha)


def _weighted_log_prob(m: GmmModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != m.n_features:
        raise DataError(f"GMM expects a matrix with {m.n_features} columns")
    with np.errstate(divide="ignore"):
        logw = np.log(m.weights)
    return np.column_stack([_log_gauss(X, m.means[k], m.covariances[k]) for k in range(m.n_components)]) + logw


def gmm_responsibilities(m: GmmModel, X) -> np.ndarray:
    lp = _weighted_log_prob(m, X)
    return np.exp(lp - logsumexp(lp, axis=1, keepdims=True))


def _kmeans_pp(X, K, rng) -> np.ndarray:
    """k-means++ seeding: each new centre drawn with probability ~ D(x)^2."""
    n = X.shape[0]
    centres = [X[rng.integers(n)]]
    d2 = np.sum((X - centres[0]) ** 2, axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(rng.integers(n))
        centres.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centres)


def _m_step(X, resp, reg_covar):
    n, d = X.shape
    nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
    weights = nk / n
    means = (resp.T @ X) / nk[:, None]
    covs = np.empty((resp.shape[1], d, d))
    for k in range(resp.shape[1]):
        diff = X - means[k]
        c = (resp[:, k, None] * diff).T @ diff / nk[k]
        c = 0.5 * (c + c.T)
        c.flat[:: d + 1] += reg_covar
        covs[k] = c
    return weights / weights.sum(), means, covs


def _fit_once(X, K, rng, reg_covar, max_iter, tol):
    centres = _kmeans_pp(X, K, rng)
    d2 = ((X[:, None, :] - centres[None, :, :]) ** 2).sum(-1)
    resp = np.zeros((X.shape[0], K))
    resp[np.arange(X.shape[0]), np.argmin(d2, axis=1)] = 1.0
    w, mu, cov = _m_step(X, resp, reg_covar)
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        m = GmmModel(w, mu, cov, reg_covar=reg_covar)
        lp = _weighted_log_prob(m, X)
        norm = logsumexp(lp, axis=1)
        trace.append(float(norm.sum()))
        resp = np.exp(lp - norm[:, None])
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol * X.shape[0]:
            converged = True
            break
        w, mu, cov = _m_step(X, resp, reg_covar)
    # the returned parameters are the ones whose likelihood ends the trace
    return GmmModel(m.weights, m.means, m.covariances, tuple(trace), converged, it, reg_covar)


def gmm_fit_em(
    X,
    K: int,
    seed: int = 0,
    n_init: int = 10,
    reg_covar: float = 1e-6,
    max_iter: int = 500,
    tol: float = 1e-6,
) -> GmmModel:
    """Best of ``n_init`` EM runs from k-means++ seeds.

    ``tol`` bounds the change of the mean per-sample log-likelihood between
    iterations. Restarts draw from one generator seeded by ``seed``; the run
    with the highest final log-likelihood wins, the earlier run on ties.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("GMM needs a 2-D matrix")
    if K < 1 or K > X.shape[0]:
        raise DataError(f"K={K} must lie in [1, {X.shape[0]}]")
    if reg_covar < 0:
        raise DataError("reg_covar must be non-negative")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        m = _fit_once(X, K, rng, reg_covar, max_iter, tol)
        if best is None or m.log_likelihood_trace[-1] > best.log_likelihood_trace[-1]:
            best = m
    return best


def n_parameters(K: int, d: int) -> int:
    return (K - 1) + K * d + K * d * (d + 1) // 2


def gmm_bic(m: GmmModel, X) -> float:
    """``-2 logL + p ln n`` for a full-covariance mixture."""
    X = np.asarray(X, dtype=np.float64)
    return -2.0 * m.log_likelihood(X) + n_parameters(m.n_components, m.n_features) * np.log(X.shape[0])


def select_k_by_bic(X, k_min: int = 2, k_max: int = 6, seed: int = 0, **fit_kw):
    """Sweep ``K`` and keep the lowest BIC (ties go to the smaller ``K``).

    Returns ``(best_k, bics, models)`` where ``bics`` and ``models`` are
    lists aligned with ``range(k_min, k_max + 1)``.
    """
    if k_min < 1 or k_max < k_min:
        raise DataError("invalid K range")
    bics, models = [], []
    for K in range(k_min, k_max + 1):
        m = gmm_fit_em(X, K, seed=seed, **fit_kw)
        models.append(m)
        bics.append(gmm_bic(m, X))
    best = int(np.argmin(bics))
    return k_min + best, bics, models
