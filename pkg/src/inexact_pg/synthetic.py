"""Seeded synthetic classification data."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .data_io import scale_features
from .losses import Dataset


def synthetic_logistic(
    n_samples: int = 1000,
    n_features: int = 100,
    density: float = 0.2,
    active_fraction: float = 0.2,
    noise: float = 0.5,
    seed: int = 0,
) -> Dataset:
    """Sparse Gaussian features; labels from a planted weight vector that
    is nonzero on a leading block of ``active_fraction * n_features``
    coordinates. Columns are maxabs-scaled."""
    rng = np.random.default_rng(seed)
    X = sp.random(
        n_samples, n_features, density=density, format="csr", random_state=rng,
        data_rvs=rng.standard_normal,
    )
    w = np.zeros(n_features)
    k = max(1, int(active_fraction * n_features))
    w[:k] = rng.standard_normal(k) * 2.0
    t = X @ w + noise * rng.standard_normal(n_samples)
    y = np.where(t >= 0, 1.0, -1.0)
    return scale_features(Dataset(X, y), "maxabs")
