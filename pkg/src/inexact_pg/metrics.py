"""Support tracking and solver comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .groups import GroupStructure, group_norms


def support_of(x: np.ndarray, gs: GroupStructure, tol: float = 0.0) -> frozenset:
    """Indices of the groups where ``x`` is nonzero (norm above ``tol``)."""
    return frozenset(np.flatnonzero(group_norms(x, gs) > tol).tolist())


@dataclass
class SupportProfile:
    supports: list
    reference: frozenset


def identification_index(profile: SupportProfile):
    """First ``k`` after which every recorded support equals the reference,
    or ``None`` if the last recorded support differs."""
    k = len(profile.supports)
    while k > 0 and profile.supports[k - 1] == profile.reference:
        k -= 1
    return None if k == len(profile.supports) else k


@dataclass(frozen=True)
class ProfileBar:
    instance: str
    height: float
    failure: bool


@dataclass
class ProfileResult:
    bars: list
    area_i: float
    area_j: float


def performance_profile(times_i, times_j, solved_i, solved_j, instances=None) -> ProfileResult:
    """Bars ``-log2(t_i / t_j)``; positive bars favour solver ``i``.

    Instances both solvers failed are dropped. When only one solver
    succeeded the bar gets height ``1.5 * max |log2(t_i / t_j)|`` over the
    instances both solved (1.5 if there are none), pointing at the
    successful solver. The area of a solver is the sum of the bars in its
    favour.
    """
    times_i = np.asarray(times_i, dtype=float)
    times_j = np.asarray(times_j, dtype=float)
    solved_i = np.asarray(solved_i, dtype=bool)
    solved_j = np.asarray(solved_j, dtype=bool)
    if instances is None:
        instances = [str(p) for p in range(times_i.size)]
    both = solved_i & solved_j
    ratios = -np.log2(times_i[both] / times_j[both])
    fail_height = 1.5 * (float(np.max(np.abs(ratios))) if ratios.size else 1.0)
    bars = []
    for p, name in enumerate(instances):
        if both[p]:
            bars.append(ProfileBar(name, float(-math.log2(times_i[p] / times_j[p])), False))
        elif solved_i[p]:
            bars.append(ProfileBar(name, fail_height, True))
        elif solved_j[p]:
            bars.append(ProfileBar(name, -fail_height, True))
    heights = np.array([b.height for b in bars])
    area_i = float(heights[heights > 0].sum()) if heights.size else 0.0
    area_j = float(np.abs(heights[heights < 0]).sum()) if heights.size else 0.0
    return ProfileResult(bars, area_i, area_j)


def compare_summaries(a: dict, b: dict, threshold: float = 1e-6) -> dict:
    """Better/same/worse counts of solver ``a`` against ``b``.

    ``a`` and ``b`` map instance ids to run summaries with ``F_final`` and
    ``groups_zero``. Only instances present in both are compared. Lower
    objective is better beyond ``threshold``; more zero groups is sparser,
    hence better.
    """
    counts = {
        "objective": {"better": 0, "same": 0, "worse": 0},
        "sparsity": {"better": 0, "same": 0, "worse": 0},
    }
    for inst in sorted(set(a) & set(b)):
        dF = a[inst]["F_final"] - b[inst]["F_final"]
        key = "better" if dF < -threshold else "worse" if dF > threshold else "same"
        counts["objective"][key] += 1
        dz = a[inst]["groups_zero"] - b[inst]["groups_zero"]
        key = "better" if dz > 0 else "worse" if dz < 0 else "same"
        counts["sparsity"][key] += 1
    counts["instances"] = len(set(a) & set(b))
    return counts
