"""Reading and writing LIBSVM text files, and column scaling."""

from __future__ import annotations

import bz2
import gzip
import io
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .losses import Dataset


class LibsvmFormatError(ValueError):
    pass


@dataclass
class RawLibsvmFile:
    """Parsed rows before label mapping. Feature indices are 1-based here,
    as in the file."""

    labels: list
    rows: list  # list of (indices, values) int/float arrays per sample
    path: str | None = None

    @property
    def n_max(self) -> int:
        return max((int(idx[-1]) for idx, _ in self.rows if idx.size), default=0)


def parse_libsvm(stream, path: str | None = None) -> RawLibsvmFile:
    """Parse ``label idx:val idx:val ...`` lines.

    Blank lines and anything after ``#`` are ignored. Indices must be
    positive and strictly increasing within a line.
    """
    labels, rows = [], []
    for lineno, line in enumerate(stream, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise LibsvmFormatError(f"line {lineno}: bad label {tokens[0]!r}") from None
        idx = np.empty(len(tokens) - 1, dtype=np.int64)
        val = np.empty(len(tokens) - 1)
        for p, tok in enumerate(tokens[1:]):
            key, sep, v = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                idx[p] = int(key)
                val[p] = float(v)
            except ValueError:
                raise LibsvmFormatError(f"line {lineno}: malformed token {tok!r}") from None
            if idx[p] < 1:
                raise LibsvmFormatError(f"line {lineno}: index {idx[p]} is not positive")
            if p and idx[p] <= idx[p - 1]:
                raise LibsvmFormatError(f"line {lineno}: indices not strictly increasing at {tok!r}")
        labels.append(label)
        rows.append((idx, val))
    return RawLibsvmFile(labels, rows, path)


def _open_text(path: Path):
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    if path.suffix == ".bz2":
        return io.TextIOWrapper(bz2.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


def read_libsvm(path) -> RawLibsvmFile:
    path = Path(path)
    with _open_text(path) as fh:
        return parse_libsvm(fh, str(path))


def map_labels(labels) -> np.ndarray:
    """Map a two-valued label vector onto {-1, +1}.

    {0, 1} becomes {-1, +1}; any other pair is mapped in sorted order,
    with a warning.
    """
    labels = np.asarray(labels, dtype=float)
    values = np.unique(labels)
    if values.size > 2:
        raise ValueError(f"expected two label values, found {values.size}")
    if set(values.tolist()) <= {-1.0, 1.0}:
        return labels.copy()
    if set(values.tolist()) <= {0.0, 1.0}:
        return np.where(labels > 0, 1.0, -1.0)
    if values.size == 1:
        raise ValueError(f"cannot map the single label {values[0]} onto -1/+1")
    warnings.warn(f"mapping labels {values[0]} -> -1 and {values[1]} -> +1", stacklevel=2)
    return np.where(labels == values[1], 1.0, -1.0)


def to_dataset(raw: RawLibsvmFile, n_features: int | None = None) -> Dataset:
    if not raw.rows:
        raise ValueError("no samples in LIBSVM input")
    n = raw.n_max if n_features is None else int(n_features)
    if raw.n_max > n:
        raise ValueError(f"feature index {raw.n_max} exceeds n_features={n}")
    indptr = np.cumsum([0] + [idx.size for idx, _ in raw.rows])
    indices = np.concatenate([idx for idx, _ in raw.rows]) - 1
    data = np.concatenate([val for _, val in raw.rows])
    X = sp.csr_matrix((data, indices, indptr), shape=(len(raw.rows), n))
    return Dataset(X, map_labels(raw.labels))


def load_libsvm(path, n_features: int | None = None, scaling: str = "maxabs") -> Dataset:
    return scale_features(to_dataset(read_libsvm(path), n_features), scaling)


def write_libsvm(data: Dataset, stream) -> None:
    X = data.features
    for i in range(X.shape[0]):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        pairs = " ".join(f"{j + 1}:{float(v)!r}" for j, v in zip(X.indices[lo:hi], X.data[lo:hi]) if v != 0)
        label = "+1" if data.labels[i] > 0 else "-1"
        stream.write(f"{label} {pairs}\n" if pairs else f"{label}\n")


STANDARDIZE_MAX_ENTRIES = 10**7


def scale_features(data: Dataset, mode: str = "maxabs") -> Dataset:
    """Scale the feature columns.

    ``maxabs`` divides every column by its largest absolute entry and keeps
    the sparsity pattern; ``standardize`` centers to mean 0 and variance 1,
    which densifies the matrix; ``none`` returns the data unchanged.
    """
    X = data.features
    if mode == "none":
        return data
    if mode == "maxabs":
        colmax = abs(X).max(axis=0).toarray().ravel()
        colmax[colmax == 0] = 1.0
        return Dataset(sp.csr_matrix(X @ sp.diags(1.0 / colmax)), data.labels)
    if mode == "standardize":
        N, n = X.shape
        if N * n > STANDARDIZE_MAX_ENTRIES:
            raise ValueError(f"standardize would densify {N}x{n} entries")
        D = X.toarray()
        std = D.std(axis=0)
        std[std == 0] = 1.0
        return Dataset(sp.csr_matrix((D - D.mean(axis=0)) / std), data.labels)
    raise ValueError(f"unknown scaling mode {mode!r}")
