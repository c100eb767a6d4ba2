"""Diagonal-covariance Gaussian mixtures for clustering event frames.

Features are laid out ``(d, T)`` like every other matrix in the package:
one column per frame.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionError, InputError
from .frontend import Spectrogram

log = logging.getLogger(__name__)

COLLAPSE_WEIGHT = 1e-8


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    log_likelihood_trace: tuple = ()

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_joint(self, features: np.ndarray) -> np.ndarray:
        """``log(w_k) + log N(x_t | mu_k, var_k)``, shape ``(T, K)``."""
        X = _frames(features)
        if X.shape[1] != self.dim:
            raise DimensionError(f"feature dimension {X.shape[1]} != model dimension {self.dim}")
        return _log_joint(X, self.weights, self.means, self.variances)

    def responsibilities(self, features) -> np.ndarray:
        lj = self.log_joint(features)
        return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))

    def log_likelihood(self, features) -> float:
        """Total data log-likelihood."""
        return float(logsumexp(self.log_joint(features), axis=1).sum())


def _frames(features) -> np.ndarray:
    F = np.asarray(features, dtype=np.float64)
    if F.ndim != 2:
        raise DimensionError("features must be a (d, T) matrix")
    return F.T


def _log_joint(X, weights, means, variances):
    d = X.shape[1]
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    prec = 1.0 / variances
    # sum_j (x_j - mu_j)^2 / var_j expanded for all (t, k) at once
    quad = (X ** 2) @ prec.T - 2.0 * X @ (means * prec).T + np.sum(means ** 2 * prec, axis=1)
    return logw - 0.5 * (d * np.log(2 * np.pi) + np.sum(np.log(variances), axis=1) + quad)


def _kmeans_pp(X, K, rng):
    T = len(X)
    centers = [X[rng.integers(T)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, K):
        total = d2.sum()
        idx = rng.integers(T) if total <= 0 else rng.choice(T, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def _kmeans(X, centers, n_steps):
    for _ in range(n_steps):
        dist = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2)
        labels = dist.argmin(axis=1)
        new = centers.copy()
        for k in range(len(centers)):
            members = X[labels == k]
            if len(members):
                new[k] = members.mean(axis=0)
        if np.array_equal(new, centers):
            break
        centers = new
    dist = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2)
    return centers, dist.argmin(axis=1)


def fit_gmm(features, K: int, seed: int = 0, max_em_iters: int = 100,
            variance_floor: float | None = None, tol: float = 1e-6,
            kmeans_steps: int = 10) -> GmmModel:
    """Fit a K-component diagonal GMM by EM.

    Initialization is k-means++ seeding followed by ``kmeans_steps`` Lloyd
    iterations. ``variance_floor`` defaults to 1e-4 times the mean per-dimension
    feature variance (with an absolute floor for constant data). A component
    whose weight drops below 1e-8 is re-seeded on a random frame.
    """
    X = _frames(features)
    T, d = X.shape
    if K < 1:
        raise InputError("K must be >= 1")
    if T < K:
        raise InputError(f"need at least K={K} frames, got {T}")
    if not np.all(np.isfinite(X)):
        raise InputError("features must be finite")
    rng = np.random.default_rng(seed)
    data_var = X.var(axis=0)
    if variance_floor is None:
        variance_floor = max(1e-4 * float(data_var.mean()), 1e-10)

    centers, labels = _kmeans(X, _kmeans_pp(X, K, rng), kmeans_steps)
    weights = np.empty(K)
    means = centers.copy()
    variances = np.empty((K, d))
    for k in range(K):
        members = X[labels == k]
        weights[k] = max(len(members), 1) / T
        variances[k] = members.var(axis=0) if len(members) > 1 else data_var
    weights /= weights.sum()
    variances = np.maximum(variances, variance_floor)

    trace = []
    for _ in range(max_em_iters):
        lj = _log_joint(X, weights, means, variances)
        norm = logsumexp(lj, axis=1, keepdims=True)
        trace.append(float(norm.sum()))
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= tol * abs(trace[-2]):
            break
        resp = np.exp(lj - norm)
        nk = resp.sum(axis=0)
        weights = nk / T
        for k in np.flatnonzero(weights < COLLAPSE_WEIGHT):
            idx = rng.integers(T)
            log.warning("GMM component %d collapsed; reinitializing at frame %d", k, idx)
            resp[:, k] = 0.0
            resp[idx] = 0.0
            resp[idx, k] = 1.0
        nk = resp.sum(axis=0)
        weights = nk / T
        safe = np.maximum(nk, 1e-300)[:, None]
        means = (resp.T @ X) / safe
        variances = np.maximum((resp.T @ X ** 2) / safe - means ** 2, variance_floor)
    return GmmModel(weights, means, variances, tuple(trace))


def hard_assign(model: GmmModel, features) -> np.ndarray:
    """Per-frame argmax of the posterior; ties go to the lowest index."""
    # np.argmax returns the first maximal index
    return np.argmax(model.log_joint(features), axis=1)


def split_spectra(spec: Spectrogram, labels, K: int) -> list:
    """Partition spectrogram columns by cluster label, keeping frame order.

    Empty clusters come back as zero-frame spectrograms; check ``is_empty``.
    """
    labels = np.asarray(labels)
    if labels.shape != (spec.n_frames,):
        raise DimensionError(f"{len(labels)} labels for {spec.n_frames} frames")
    return [spec.select(np.flatnonzero(labels == k)) for k in range(K)]
