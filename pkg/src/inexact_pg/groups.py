"""Overlapping group structures and the operators built on them.

Indices are 0-based throughout. Dual vectors store one block per group,
laid out contiguously in group order, so block ``i`` occupies
``y[offsets[i]:offsets[i + 1]]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True, eq=False)
class GroupStructure:
    """Groups ``g_i`` of ``{0..n-1}`` with positive weights.

    Parameters
    ----------
    n : int
        Ambient dimension.
    groups : sequence of index arrays
        Each group is stored sorted and duplicate free.
    lam : array_like
        One strictly positive weight per group.
    """

    n: int
    groups: tuple
    lam: np.ndarray
    offsets: np.ndarray = field(init=False, repr=False)
    index: np.ndarray = field(init=False, repr=False)
    sizes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.n)
        if n <= 0:
            raise ValueError("n must be positive")
        groups = []
        for g in self.groups:
            g = np.unique(np.asarray(g, dtype=np.int64))
            if g.size == 0:
                raise ValueError("groups must be nonempty")
            if g[0] < 0 or g[-1] >= n:
                raise ValueError(f"group index out of range for n={n}")
            g.setflags(write=False)
            groups.append(g)
        if not groups:
            raise ValueError("at least one group is required")
        lam = np.array(self.lam, dtype=float).reshape(-1)
        if lam.size != len(groups):
            raise ValueError(f"expected {len(groups)} weights, got {lam.size}")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise ValueError("weights must be finite and strictly positive")
        sizes = np.array([g.size for g in groups], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        index = np.concatenate(groups)
        if np.unique(index).size != n:
            raise ValueError("groups must cover every coordinate")
        for a in (lam, sizes, offsets, index):
            a.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "groups", tuple(groups))
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "index", index)

    @property
    def ngroups(self) -> int:
        return len(self.groups)

    @property
    def dual_dim(self) -> int:
        return int(self.offsets[-1])

    def block(self, y: np.ndarray, i: int) -> np.ndarray:
        return y[self.offsets[i]:self.offsets[i + 1]]

    def with_weights(self, lam) -> "GroupStructure":
        return GroupStructure(self.n, self.groups, lam)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "groups": [g.tolist() for g in self.groups],
            "lambda": self.lam.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroupStructure":
        return cls(int(d["n"]), tuple(d["groups"]), d["lambda"])


def save_groups(gs: GroupStructure, path) -> None:
    Path(path).write_text(json.dumps(gs.to_dict()))


def load_groups(path) -> GroupStructure:
    return GroupStructure.from_dict(json.loads(Path(path).read_text()))


def _check_len(v: np.ndarray, expected: int, what: str) -> None:
    if v.ndim != 1 or v.shape[0] != expected:
        raise ValueError(f"{what} has shape {v.shape}, expected ({expected},)")


def block_norms(y: np.ndarray, gs: GroupStructure) -> np.ndarray:
    """Euclidean norm of every dual block."""
    y = np.asarray(y, dtype=float)
    _check_len(y, gs.dual_dim, "dual vector")
    return np.sqrt(np.add.reduceat(y * y, gs.offsets[:-1]))


def group_norms(x: np.ndarray, gs: GroupStructure) -> np.ndarray:
    """``||x_{g_i}||`` for every group."""
    x = np.asarray(x, dtype=float)
    _check_len(x, gs.n, "x")
    xg = x[gs.index]
    return np.sqrt(np.add.reduceat(xg * xg, gs.offsets[:-1]))


def regularizer_value(x: np.ndarray, gs: GroupStructure) -> float:
    """Weighted sum of group norms; shared coordinates count once per group."""
    return float(gs.lam @ group_norms(x, gs))


def apply_A(y: np.ndarray, gs: GroupStructure) -> np.ndarray:
    """Scatter-add every dual block into the coordinates of its group."""
    y = np.asarray(y, dtype=float)
    _check_len(y, gs.dual_dim, "dual vector")
    return np.bincount(gs.index, weights=y, minlength=gs.n)


def apply_A_transpose(v: np.ndarray, gs: GroupStructure) -> np.ndarray:
    """Gather ``v_{g_i}`` into block ``i``; the adjoint of :func:`apply_A`."""
    v = np.asarray(v, dtype=float)
    _check_len(v, gs.n, "v")
    return v[gs.index]


def project_dual_feasible(y: np.ndarray, gs: GroupStructure) -> np.ndarray:
    """Project every block onto the ball of radius ``lam_i``."""
    norms = block_norms(y, gs)
    scale = np.ones_like(norms)
    over = norms > gs.lam
    scale[over] = gs.lam[over] / norms[over]
    return y * np.repeat(scale, gs.sizes)


def zero_groups(x: np.ndarray, gs: GroupStructure, mask: np.ndarray) -> np.ndarray:
    """Copy of ``x`` with every coordinate of the masked groups set to zero."""
    out = np.array(x, dtype=float)
    out[gs.index[np.repeat(mask, gs.sizes)]] = 0.0
    return out


def overlap_size(ratio: float, grpsize: int) -> int:
    # round half up; Python's round() would send 0.5 to 0
    return int(math.floor(ratio * grpsize + 0.5))


def generate_groups(n: int, ratio: float, grpsize: int) -> GroupStructure:
    """Chain of groups of ``grpsize`` consecutive coordinates.

    Neighbouring groups share ``round(ratio * grpsize)`` coordinates. The
    last group is cut off at ``n``. Weights are set to one; use
    :func:`set_weights` afterwards.

    Examples
    --------
    >>> [g.tolist() for g in generate_groups(9, 0.25, 4).groups]
    [[0, 1, 2, 3], [3, 4, 5, 6], [6, 7, 8]]
    """
    if n <= 0 or grpsize <= 0:
        raise ValueError("n and grpsize must be positive")
    if not 0.0 <= ratio < 1.0:
        raise ValueError("ratio must lie in [0, 1)")
    overlap = overlap_size(ratio, grpsize)
    if overlap >= grpsize:
        raise ValueError(f"overlap {overlap} must be smaller than grpsize {grpsize}")
    if grpsize >= n:
        return GroupStructure(n, (np.arange(n),), [1.0])
    stride = grpsize - overlap
    groups = []
    start = 0
    while True:
        end = min(start + grpsize, n)
        g = np.arange(start, end)
        if groups and set(g.tolist()) <= set(groups[-1].tolist()):
            break
        groups.append(g)
        if end == n:
            break
        start += stride
    return GroupStructure(n, tuple(groups), np.ones(len(groups)))


def set_weights(gs: GroupStructure, scale: float) -> GroupStructure:
    """Weights ``scale * sqrt(|g_i|)``."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    return gs.with_weights(scale * np.sqrt(gs.sizes.astype(float)))

