"""Inexact proximal-gradient outer loop.

Three ways to decide how accurately each prox subproblem is solved:

* ``option1``: duality gap at most ``c_k ||s_k||^2`` (relative to the step),
* ``option2``: duality gap at most ``gamma2`` times the dual suboptimality
  of the current iterate,
* ``option3``: duality gap at most ``C / k^3`` (absolute, summable).

Options 1 and 2 follow the step with an Armijo backtracking search. Option 3
accepts the subproblem solution outright whenever a quadratic upper-bound
test passes and otherwise shrinks the step and retries from the same point.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .groups import GroupStructure, group_norms, regularizer_value, set_weights
from .prox_dual import (
    GAP_FLOOR,
    InnerLimits,
    NumericalError,
    ProxSubproblem,
    TerminationRule,
    correction_step,
    phi_primal,
    solve_subproblem_enhanced,
    solve_subproblem_pga,
)

OPTIONS = ("option1", "option2", "option3")
STATUSES = ("solved", "iter_limit", "time_limit", "numerical_difficulties")


class LineSearchFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class OuterConfig:
    option: str = "option1"
    xi: float = 0.5
    eta: float = 1e-3
    zeta: float = 0.8
    alpha0: float = 1.0
    gamma1: float = 0.2
    gamma2: float = 0.5
    C: float = 1000.0
    eps_tol: float = 1e-5
    max_iters: int = 10_000
    max_time: float = 300.0
    alpha_mode: str = "faithful"
    max_increases: int = 50
    schedule: str = "none"
    psi: float = 0.5
    omega: float = 0.5
    mu_f: float | None = None
    eps0: float | None = None
    iota: float = 1.0
    subsolver: str = "enhanced"
    inner_max_iter: int = 5000
    xi2: float = 0.5
    eta2: float = 1e-3
    max_backtracks: int = 60

    def __post_init__(self):
        if self.option not in OPTIONS:
            raise ValueError(f"option must be one of {OPTIONS}")
        for name in ("xi", "eta", "zeta", "xi2", "eta2"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not 0 < self.gamma1 < 2:
            raise ValueError("gamma1 must lie in (0, 2)")
        if not 0 < self.gamma2 <= 0.5:
            raise ValueError("gamma2 must lie in (0, 1/2]")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.eps_tol > 0:
            raise ValueError("eps_tol must be positive")
        if self.max_iters < 1 or not self.max_time > 0:
            raise ValueError("limits must be positive")
        if self.alpha_mode not in ("faithful", "practical"):
            raise ValueError("alpha_mode must be 'faithful' or 'practical'")
        if self.max_increases < 0:
            raise ValueError("max_increases must be >= 0")
        if self.schedule not in ("none", "strategy1", "strategy2"):
            raise ValueError("schedule must be none, strategy1 or strategy2")
        if self.schedule == "strategy1":
            if self.mu_f is None or not self.mu_f > 0:
                raise ValueError("strategy1 needs the strong convexity constant mu_f")
            if not 0 < self.psi < 1:
                raise ValueError("psi must lie in (0, 1)")
            if not 0 < 1 - self.alpha0 * self.mu_f < 1:
                raise ValueError("strategy1 needs 0 < 1 - alpha0 * mu_f < 1")
        if self.schedule == "strategy2" and not 0 < self.omega < 1:
            raise ValueError("omega must lie in (0, 1)")
        if self.eps0 is not None and not 0 < self.eps0 <= self.alpha0 / 2:
            raise ValueError("eps0 must lie in (0, alpha0/2]")
        if not self.iota > 0:
            raise ValueError("iota must be positive")
        if self.subsolver not in ("enhanced", "pga"):
            raise ValueError("subsolver must be 'enhanced' or 'pga'")
        if self.inner_max_iter < 1 or self.max_backtracks < 1:
            raise ValueError("inner limits must be positive")


def choose_ck(alpha: float, gamma1: float) -> float:
    """Largest admissible inexactness constant for option1."""
    return 0.25 * (math.sqrt(6.0 / ((1.0 + gamma1) * alpha)) - math.sqrt(2.0 / alpha)) ** 2


def delta_option1(s: np.ndarray, eps: float, alpha: float) -> float:
    ns = float(np.linalg.norm(s))
    return -ns * ns / alpha + math.sqrt(2.0 * eps / alpha) * ns + eps


def delta_option2(x: np.ndarray, s: np.ndarray, grad: np.ndarray, gs: GroupStructure) -> float:
    return regularizer_value(x + s, gs) - regularizer_value(x, gs) + float(grad @ s)


def line_search(objective, x, s, delta, F_x, xi=0.5, eta=1e-3, max_backtracks=60):
    """Armijo backtracking on ``F(x + xi^j s) <= F(x) + eta xi^j delta``.

    A trial must also lower ``F`` in floating point: once ``eta delta`` is
    below the rounding level of ``F`` the Armijo test alone would accept a
    step that changes nothing.

    Returns ``(x_new, F_new, j)``. Raises :class:`LineSearchFailure` once
    ``j`` exceeds ``max_backtracks``.
    """
    if not delta < 0:
        raise ValueError(f"line search needs a negative model decrease, got {delta}")
    step = 1.0
    for j in range(max_backtracks + 1):
        x_new = x + step * s
        F_new = objective(x_new)
        if F_new < F_x and F_new <= F_x + eta * step * delta:
            return x_new, F_new, j
        step *= xi
    raise LineSearchFailure(f"no sufficient decrease after {max_backtracks} backtracks")


def update_alpha(j: int, alpha: float, mode: str, zeta: float, increases_left: int = 0):
    """Next step parameter. Returns ``(alpha_next, increased)``."""
    if j > 0:
        return zeta * alpha, False
    if mode == "practical" and increases_left > 0:
        return 1.1 * alpha, True
    return alpha, False


def chi_proxy(x_hat: np.ndarray, x: np.ndarray, alpha: float, gap: float) -> float:
    """Computable upper bound on ``||T(x, alpha) - x|| / alpha``."""
    d = float(np.linalg.norm(x_hat - x))
    return (d + math.sqrt(2.0 * alpha * max(gap, 0.0))) / min(1.0, alpha)


def eps_cap(k: int, cfg: OuterConfig) -> float:
    """Upper bound the subproblem gap must meet at outer iteration ``k``."""
    if cfg.schedule == "strategy1":
        theta = 1.0 - cfg.alpha0 * cfg.mu_f
        return min(cfg.alpha0 / 2, cfg.psi ** (2 * k) * theta ** (2 * (k + 1)))
    if cfg.schedule == "strategy2":
        eps0 = cfg.alpha0 / 2 if cfg.eps0 is None else cfg.eps0
        return eps0 * cfg.omega ** (2 * k)
    return math.inf


def alpha_floor(cfg: OuterConfig, L: float) -> float:
    """Lower bound on every step parameter in faithful mode."""
    if cfg.option == "option1":
        bound = 3 * cfg.gamma1 * cfg.zeta * (1 - cfg.eta) / (L * (1 + cfg.gamma1))
    else:
        bound = cfg.zeta * (1 - cfg.eta) / L
    return min(cfg.alpha0, bound)


def max_decreases(cfg: OuterConfig, L: float) -> int:
    return math.ceil(math.log(alpha_floor(cfg, L) / cfg.alpha0) / math.log(cfg.zeta))


ROW_FIELDS = (
    "k", "F", "chi", "eps", "delta", "alpha", "backtracks", "inner_iters",
    "inner_status", "corrected", "nonzero_groups", "zero_groups", "time",
)


@dataclass
class RunRecord:
    """Per-iteration telemetry of one solve."""

    config: dict
    rows: list = field(default_factory=list)
    supports: list = field(default_factory=list)
    status: str | None = None
    x_final: np.ndarray | None = None
    F_final: float = math.nan
    time_s: float = 0.0
    groups_zero: int = 0
    groups_nonzero: int = 0

    def finish(self, status, x, F, gs, t0):
        if self.status is not None:
            raise RuntimeError("terminal status already set")
        self.status = status
        self.x_final = x
        self.F_final = F
        self.time_s = time.perf_counter() - t0
        nz = int(np.count_nonzero(group_norms(x, gs)))
        self.groups_nonzero = nz
        self.groups_zero = gs.ngroups - nz

    @property
    def iters(self) -> int:
        return len(self.rows)

    def summary(self) -> dict:
        return {
            "status": self.status,
            "F_final": self.F_final,
            "groups_zero": self.groups_zero,
            "groups_nonzero": self.groups_nonzero,
            "iters": self.iters,
            "time_s": self.time_s,
            "config": self.config,
        }

    def write(self, out_dir, stem: str) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{stem}.csv"
        json_path = out_dir / f"{stem}.json"
        with atomic_writer(csv_path) as fh:
            w = csv.DictWriter(fh, fieldnames=ROW_FIELDS)
            w.writeheader()
            w.writerows(self.rows)
        with atomic_writer(json_path) as fh:
            json.dump(self.summary(), fh, indent=2)
        return csv_path, json_path


class atomic_writer:
    """Text file that only appears under its final name once fully written."""

    def __init__(self, path):
        self.path = Path(path)

    def __enter__(self):
        fd, self.tmp = tempfile.mkstemp(dir=self.path.parent, prefix=f".{self.path.name}.")
        self.fh = os.fdopen(fd, "w", newline="")
        return self.fh

    def __exit__(self, exc_type, exc, tb):
        self.fh.close()
        if exc_type is None:
            os.replace(self.tmp, self.path)
        else:
            os.unlink(self.tmp)
        return False


def solve(loss, gs: GroupStructure, cfg: OuterConfig = OuterConfig(), x0=None, trace_inner=False):
    """Minimize ``loss(x) + r(x)``.

    Parameters
    ----------
    loss : object
        Provides ``value(x)`` and ``value_and_gradient(x)``.
    gs : GroupStructure
    cfg : OuterConfig
    x0 : array_like, optional
        Starting point, zero by default.

    Returns
    -------
    x : ndarray
        Final iterate.
    record : RunRecord
    """
    t0 = time.perf_counter()
    record = RunRecord(config=asdict(cfg))
    subsolve = solve_subproblem_enhanced if cfg.subsolver == "enhanced" else solve_subproblem_pga
    limits = InnerLimits(cfg.inner_max_iter, cfg.xi2, cfg.eta2, cfg.max_backtracks)

    def objective(z):
        return loss.value(z) + regularizer_value(z, gs)

    x = np.zeros(gs.n) if x0 is None else np.array(x0, dtype=float)
    fx, g = loss.value_and_gradient(x)
    F = fx + regularizer_value(x, gs)
    alpha = cfg.alpha0
    y = np.zeros(gs.dual_dim)
    sigma = 1.0
    eps_prev = cfg.alpha0 / 2
    x_ref = None
    limit_hits = 0
    increases = 0

    if not math.isfinite(F):
        record.finish("numerical_difficulties", x, F, gs, t0)
        return x, record

    for k in range(cfg.max_iters):
        if time.perf_counter() - t0 > cfg.max_time:
            record.finish("time_limit", x, F, gs, t0)
            return x, record

        sp = ProxSubproblem(x - alpha * g, alpha, gs, x)
        cap = eps_cap(k, cfg)
        if cfg.option == "option1":
            c_k = choose_ck(alpha, cfg.gamma1)
            rule = TerminationRule("option1", c_k=c_k, eps_prev=eps_prev, iota=cfg.iota, gap_cap=cap)
        elif cfg.option == "option2":
            rule = TerminationRule("option2", gamma2=cfg.gamma2, eps_prev=eps_prev, iota=cfg.iota, gap_cap=cap)
        else:
            rule = TerminationRule(
                "option3", eps_fixed=cfg.C / (k + 1) ** 3, eps_prev=eps_prev, iota=cfg.iota, gap_cap=cap
            )
        try:
            res = subsolve(sp, rule, y, limits, sigma, chi_tol=cfg.eps_tol, trace=trace_inner)
        except NumericalError:
            record.finish("numerical_difficulties", x, F, gs, t0)
            return x, record
        y, sigma = res.y_hat, res.sigma
        x_hat, gap = res.x_hat, res.gap

        corrected = False
        failed = res.status in ("iter_limit", "stalled")
        if failed:
            limit_hits += 1
            if x_ref is not None:
                x_c = correction_step(x_hat, x_ref, sp)
                if x_c is not x_hat:
                    x_hat = x_c
                    gap = max(phi_primal(x_c, sp) - res.phi_dual, 0.0)
                    corrected = True
        else:
            limit_hits = 0
            x_ref = x

        chi = chi_proxy(x_hat, x, alpha, gap)
        row = {
            "k": k, "F": F, "chi": chi, "eps": gap, "delta": math.nan, "alpha": alpha,
            "backtracks": 0, "inner_iters": res.inner_iters, "inner_status": res.status,
            "corrected": int(corrected),
        }
        if chi <= cfg.eps_tol:
            _append_row(record, row, x, gs, t0)
            record.finish("solved", x, F, gs, t0)
            return x, record
        if limit_hits >= 2:
            _append_row(record, row, x, gs, t0)
            record.finish("numerical_difficulties", x, F, gs, t0)
            return x, record

        s = x_hat - x
        if cfg.option == "option3":
            f_hat, g_hat = loss.value_and_gradient(x_hat)
            if not math.isfinite(f_hat):
                _append_row(record, row, x, gs, t0)
                record.finish("numerical_difficulties", x, F, gs, t0)
                return x, record
            # slack of a few ulps: for tiny steps both sides agree to rounding
            slack = 8 * np.finfo(float).eps * (1.0 + abs(fx))
            if f_hat <= fx + float(g @ s) + float(s @ s) / alpha + slack:
                x, fx, g = x_hat, f_hat, g_hat
                F = fx + regularizer_value(x, gs)
            else:
                alpha *= cfg.zeta
                row["backtracks"] = 1
        else:
            if cfg.option == "option1":
                eps_k = gap if failed else rule.c_k * float(s @ s)
                delta = delta_option1(s, eps_k, alpha)
            else:
                delta = delta_option2(x, s, g, gs)
            row["delta"] = delta
            if not delta < 0:
                _append_row(record, row, x, gs, t0)
                record.finish("numerical_difficulties", x, F, gs, t0)
                return x, record
            try:
                x_new, F_new, j = line_search(
                    objective, x, s, delta, F, cfg.xi, cfg.eta, cfg.max_backtracks
                )
            except LineSearchFailure:
                _append_row(record, row, x, gs, t0)
                record.finish("numerical_difficulties", x, F, gs, t0)
                return x, record
            if not math.isfinite(F_new):
                record.finish("numerical_difficulties", x, F, gs, t0)
                return x, record
            row["backtracks"] = j
            alpha, increased = update_alpha(
                j, alpha, cfg.alpha_mode, cfg.zeta, cfg.max_increases - increases
            )
            increases += increased
            x, F = x_new, F_new
            fx, g = loss.value_and_gradient(x)

        # a floored gap of exactly zero would leave no margin in the
        # predicted-zero test, and rounding alone would then decide it
        eps_prev = max(gap, GAP_FLOOR * (1.0 + abs(res.phi)))
        row["F"] = F
        _append_row(record, row, x, gs, t0)

    record.finish("iter_limit", x, F, gs, t0)
    return x, record


def _append_row(record, row, x, gs, t0):
    nz = group_norms(x, gs) != 0.0
    row["nonzero_groups"] = int(nz.sum())
    row["zero_groups"] = gs.ngroups - row["nonzero_groups"]
    row["time"] = time.perf_counter() - t0
    record.rows.append(row)
    record.supports.append(frozenset(np.flatnonzero(nz).tolist()))


class LambdaSearchError(RuntimeError):
    def __init__(self, msg, bracket):
        super().__init__(msg)
        self.bracket = bracket


def lambda_min_guess(loss, gs: GroupStructure) -> float:
    """``max_i ||grad f(0)_{g_i}|| / sqrt(|g_i|)``."""
    g0 = loss.gradient(np.zeros(gs.n))
    return float(np.max(group_norms(g0, gs) / np.sqrt(gs.sizes)))


def find_lambda_min(
    loss,
    gs: GroupStructure,
    cfg: OuterConfig | None = None,
    bisect_steps: int = 20,
    max_grid_steps: int = 60,
    zero_tol: float = 1e-10,
    probe_iters: int = 5,
    floor: float = 1e-12,
):
    """Smallest tested scale ``Lam`` whose weights ``Lam sqrt(|g_i|)`` make
    zero the solution.

    Each probe runs a few outer iterations from ``x = 0``. Because the loop
    strictly decreases the objective, the iterate leaves zero whenever zero
    is not optimal, so a short run decides the question.
    """
    cfg = cfg or OuterConfig()
    cfg = replace(cfg, max_iters=probe_iters, alpha_mode="faithful", schedule="none")

    def is_zero(scale):
        x, _ = solve(loss, set_weights(gs, scale), cfg)
        return bool(np.all(group_norms(x, gs) < zero_tol))

    guess = lambda_min_guess(loss, gs)
    if guess <= floor:
        return floor
    if is_zero(guess):
        hi, lo = guess, None
        for _ in range(max_grid_steps):
            cand = hi / 2
            if cand < floor:
                return hi
            if is_zero(cand):
                hi = cand
            else:
                lo = cand
                break
        if lo is None:
            raise LambdaSearchError("no nonzero solution found below the guess", (0.0, hi))
    else:
        lo, hi = guess, None
        for _ in range(max_grid_steps):
            cand = lo * 2
            if is_zero(cand):
                hi = cand
                break
            lo = cand
        if hi is None:
            raise LambdaSearchError("no zero solution found above the guess", (lo, math.inf))
    for _ in range(bisect_steps):
        mid = 0.5 * (lo + hi)
        if is_zero(mid):
            hi = mid
        else:
            lo = mid
    return hi
