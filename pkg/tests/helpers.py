"""Instance generators and run checks shared by the test modules."""

import numpy as np

from inexact_pg.groups import GroupStructure, generate_groups, group_norms
from inexact_pg.outer import alpha_floor
from inexact_pg.prox_dual import ProxSubproblem


def random_chain(rng, n_min=5, n_max=20):
    """Random chain of overlapping groups, like the 13-variable example
    with three groups sharing one coordinate each."""
    n = int(rng.integers(n_min, n_max + 1))
    grpsize = int(rng.integers(2, max(3, n // 2 + 2)))
    ratio = float(rng.choice([0.1, 0.2, 0.3, 0.4]))
    if np.floor(ratio * grpsize + 0.5) >= grpsize:
        ratio = 0.0
    gs = generate_groups(n, ratio, grpsize)
    return gs.with_weights(rng.uniform(0.1, 1.0, gs.ngroups))


def random_partition(rng, n_min=5, n_max=20):
    n = int(rng.integers(n_min, n_max + 1))
    cuts = np.sort(rng.choice(np.arange(1, n), size=int(rng.integers(0, min(5, n - 1) + 1)), replace=False))
    bounds = [0, *cuts.tolist(), n]
    groups = tuple(range(a, b) for a, b in zip(bounds[:-1], bounds[1:]))
    return GroupStructure(n, groups, rng.uniform(0.1, 1.0, len(groups)))


def random_subproblem(rng, gs):
    alpha = float(rng.uniform(0.2, 2.0))
    u = float(rng.uniform(0.2, 2.0)) * rng.standard_normal(gs.n)
    x_anchor = u + 0.3 * rng.standard_normal(gs.n)
    return ProxSubproblem(u, alpha, gs, x_anchor)


def check_faithful_run(rec, cfg, L, F0):
    """Violated run invariants of an option1/option2 faithful-mode run
    (empty list when all hold).

    Every row that took a step (finite ``delta``) must have ``delta < 0``
    and an objective strictly below the previous one, starting from
    ``F0 = F(x0)``; every step parameter must stay above the floor.
    """
    problems = []
    floor = alpha_floor(cfg, L)
    F_prev = F0
    for row in rec.rows:
        if row["alpha"] < floor:
            problems.append(f"k={row['k']}: alpha={row['alpha']!r} below floor {floor!r}")
        if np.isnan(row["delta"]):
            continue
        if not row["delta"] < 0:
            problems.append(f"k={row['k']}: delta={row['delta']!r} not negative")
        if not row["F"] < F_prev:
            problems.append(f"k={row['k']}: F={row['F']!r} not below {F_prev!r}")
        F_prev = row["F"]
    return problems


def zero_group_count(x, gs):
    return int(np.sum(group_norms(x, gs) == 0.0))
