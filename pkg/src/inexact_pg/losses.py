"""Smooth losses: binary logistic regression and a convex quadratic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix (CSR, one row per sample) and labels in {-1, +1}."""

    features: sp.csr_matrix
    labels: np.ndarray

    def __post_init__(self):
        X = sp.csr_matrix(self.features, dtype=float)
        X.sort_indices()
        y = np.asarray(self.labels, dtype=float).reshape(-1)
        if X.shape[0] == 0:
            raise ValueError("dataset has no samples")
        if X.shape[0] != y.size:
            raise ValueError(f"{X.shape[0]} rows but {y.size} labels")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if not np.all(np.isfinite(X.data)):
            raise ValueError("features contain NaN or Inf")
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def _margins(x, data):
    return data.labels * (data.features @ x)


def logistic_value(x: np.ndarray, data: Dataset) -> float:
    t = _margins(x, data)
    return float(np.mean(np.log1p(np.exp(-np.abs(t))) + np.maximum(0.0, -t)))


def logistic_gradient(x: np.ndarray, data: Dataset) -> np.ndarray:
    t = _margins(x, data)
    w = -data.labels * expit(-t)
    return (data.features.T @ w) / data.n_samples


def spectral_norm_sq(X, iters: int = 20, seed: int = 0) -> float:
    """Power-iteration estimate of the largest eigenvalue of ``X^T X``."""
    v = np.random.default_rng(seed).standard_normal(X.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = X.T @ (X @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        est = float(v @ w)
        v = w / nw
    Xv = X @ v
    return max(est, float(Xv @ Xv))


def logistic_lipschitz(data: Dataset, iters: int = 20) -> float:
    """Upper bound ``||D||^2 / (4N)`` with ``||D||`` from power iteration."""
    return spectral_norm_sq(data.features, iters) / (4.0 * data.n_samples)


class LogisticLoss:
    """Mean logistic loss over a :class:`Dataset`."""

    def __init__(self, data: Dataset):
        self.data = data
        self.n = data.n_features
        self._lipschitz = None

    def value(self, x):
        return logistic_value(x, self.data)

    def gradient(self, x):
        return logistic_gradient(x, self.data)

    def value_and_gradient(self, x):
        data = self.data
        t = _margins(x, data)
        val = float(np.mean(np.log1p(np.exp(-np.abs(t))) + np.maximum(0.0, -t)))
        w = -data.labels * expit(-t)
        return val, (data.features.T @ w) / data.n_samples

    def lipschitz_estimate(self) -> float:
        if self._lipschitz is None:
            self._lipschitz = logistic_lipschitz(self.data)
        return self._lipschitz


class QuadraticLoss:
    """``f(x) = 0.5 x^T Q x - b^T x`` with ``Q`` symmetric positive definite.

    ``Q`` may be given as a 1-D array, meaning a diagonal matrix.
    """

    def __init__(self, Q, b):
        Q = np.asarray(Q, dtype=float)
        b = np.asarray(b, dtype=float).reshape(-1)
        if Q.ndim == 1:
            if Q.size != b.size:
                raise ValueError("Q and b sizes differ")
            eig = Q
        elif Q.ndim == 2 and Q.shape == (b.size, b.size):
            if not np.allclose(Q, Q.T):
                raise ValueError("Q must be symmetric")
            eig = np.linalg.eigvalsh(Q)
        else:
            raise ValueError(f"bad Q shape {Q.shape}")
        if eig.min() <= 0:
            raise ValueError("Q must be positive definite")
        self.Q = Q
        self.b = b
        self.n = b.size
        self.mu = float(eig.min())
        self.L = float(eig.max())

    def _Qx(self, x):
        return self.Q * x if self.Q.ndim == 1 else self.Q @ x

    def value(self, x):
        return float(0.5 * x @ self._Qx(x) - self.b @ x)

    def gradient(self, x):
        return self._Qx(x) - self.b

    def value_and_gradient(self, x):
        Qx = self._Qx(x)
        return float(0.5 * x @ Qx - self.b @ x), Qx - self.b

    def lipschitz_estimate(self) -> float:
        return self.L


def quadratic_model(Q, b) -> QuadraticLoss:
    return QuadraticLoss(Q, b)
