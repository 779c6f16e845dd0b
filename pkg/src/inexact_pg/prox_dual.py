"""The proximal-gradient subproblem and its dual.

For a point ``u`` and step ``alpha`` the primal subproblem is

    phi(x) = ||x - u||^2 / (2 alpha) + r(x)

and its dual, over the product of balls ``||y_i|| <= lam_i``, is

    phi_d(y) = -(alpha / 2) ||A y||^2 - u^T A y.

Any dual-feasible ``y`` gives ``phi_d(y) <= min phi``, so
``phi(x) - phi_d(y)`` certifies how far ``x`` is from the exact prox.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .groups import (
    GroupStructure,
    apply_A,
    block_norms,
    group_norms,
    project_dual_feasible,
    regularizer_value,
    zero_groups,
)

GAP_FLOOR = 1e-14


class NumericalError(ArithmeticError):
    """Raised when an objective becomes NaN or infinite."""


@dataclass(frozen=True, eq=False)
class ProxSubproblem:
    """``u = x_anchor - alpha * grad f(x_anchor)``."""

    u: np.ndarray
    alpha: float
    gs: GroupStructure
    x_anchor: np.ndarray

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.u.shape != (self.gs.n,) or self.x_anchor.shape != (self.gs.n,):
            raise ValueError("u and x_anchor must have length n")


@dataclass(frozen=True)
class TerminationRule:
    """When the dual solver may stop.

    ``option1`` stops once ``gap <= c_k ||x_hat - x_anchor||^2``, ``option2``
    once ``gap <= gamma2 (phi(x_anchor) - phi_d(y))`` and ``option3`` once
    ``gap <= eps_fixed``. Whatever the variant, ``gap <= gap_cap`` must also
    hold. ``eps_prev`` and ``iota`` set the margin of the predicted-zero set.
    """

    variant: str
    c_k: float = 0.0
    gamma2: float = 0.5
    eps_fixed: float = 0.0
    eps_prev: float = 0.5
    iota: float = 1.0
    gap_cap: float = math.inf

    def __post_init__(self):
        if self.variant == "option1":
            if not self.c_k > 0:
                raise ValueError("option1 needs c_k > 0")
        elif self.variant == "option2":
            if not 0 < self.gamma2 <= 0.5:
                raise ValueError("gamma2 must lie in (0, 1/2]")
        elif self.variant == "option3":
            if not self.eps_fixed > 0:
                raise ValueError("option3 needs eps_fixed > 0")
        else:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.eps_prev < 0 or not self.iota > 0:
            raise ValueError("eps_prev must be >= 0 and iota > 0")
        if not self.gap_cap >= 0:
            raise ValueError("gap_cap must be >= 0")


@dataclass(frozen=True)
class InnerLimits:
    max_iter: int = 5000
    xi2: float = 0.5
    eta2: float = 1e-3
    max_backtracks: int = 60
    sigma_max: float = 1e12


@dataclass
class SubproblemResult:
    x_hat: np.ndarray
    y_hat: np.ndarray
    gap: float
    inner_iters: int
    status: str  # gap_met, stationary, iter_limit, stalled
    eps_out: float
    phi: float
    phi_dual: float
    zero_set: np.ndarray  # boolean mask of groups zeroed at exit
    sigma: float
    trace: list = field(default_factory=list)


def phi_primal(x: np.ndarray, sp: ProxSubproblem) -> float:
    d = x - sp.u
    return float(d @ d) / (2.0 * sp.alpha) + regularizer_value(x, sp.gs)


def _phi_dual_from_Ay(Ay, sp):
    return float(-0.5 * sp.alpha * (Ay @ Ay) - sp.u @ Ay)


def phi_dual(y: np.ndarray, sp: ProxSubproblem) -> float:
    return _phi_dual_from_Ay(apply_A(y, sp.gs), sp)


def phi_dual_gradient(y: np.ndarray, sp: ProxSubproblem) -> np.ndarray:
    """``-A^T (alpha A y + u)``."""
    Ay = apply_A(y, sp.gs)
    return -(sp.alpha * Ay + sp.u)[sp.gs.index]


def predict_support_set(y, gs: GroupStructure, eps_prev: float, iota: float = 1.0) -> np.ndarray:
    """Boolean mask of groups whose dual block is strictly inside the
    shrunken ball ``||y_i|| < lam_i - eps_prev**iota``."""
    return block_norms(y, gs) < gs.lam - eps_prev ** iota


def projected_primal(y, sp: ProxSubproblem, zero_mask=None) -> np.ndarray:
    """``u + alpha A y`` with every coordinate of a masked group set to zero.

    A coordinate shared by a masked and an unmasked group is zeroed.
    """
    x = sp.u + sp.alpha * apply_A(y, sp.gs)
    if zero_mask is None or not zero_mask.any():
        return x
    return zero_groups(x, sp.gs, zero_mask)


def _floor_gap(gap, phi):
    return 0.0 if gap < GAP_FLOOR * (1.0 + abs(phi)) else gap


def _dual_ascent(sp, rule, warm, limits, sigma, predict, chi_tol, keep_trace):
    gs, alpha, u = sp.gs, sp.alpha, sp.u
    if warm is None:
        y = np.zeros(gs.dual_dim)
    else:
        y = project_dual_feasible(np.asarray(warm, dtype=float), gs)
    Ay = apply_A(y, gs)
    phid = _phi_dual_from_Ay(Ay, sp)
    phi_anchor = phi_primal(sp.x_anchor, sp) if rule.variant == "option2" else 0.0
    threshold = gs.lam - rule.eps_prev ** rule.iota
    no_zero = np.zeros(gs.ngroups, dtype=bool)
    trace = []
    status = "iter_limit"
    t = 0
    while True:
        x_trial = u + alpha * Ay
        if predict:
            mask = block_norms(y, gs) < threshold
            x_hat = zero_groups(x_trial, gs, mask) if mask.any() else x_trial
        else:
            mask = no_zero
            x_hat = x_trial
        phi = phi_primal(x_hat, sp)
        if not (math.isfinite(phi) and math.isfinite(phid)):
            raise NumericalError(f"non-finite subproblem objective at inner iteration {t}")
        gap = _floor_gap(phi - phid, phi)
        if keep_trace:
            trace.append((t, phi, phid, gap, int(mask.sum())))

        if rule.variant == "option1":
            d = x_hat - sp.x_anchor
            met = gap <= rule.c_k * float(d @ d)
        elif rule.variant == "option2":
            met = gap <= rule.gamma2 * (phi_anchor - phid)
        else:
            met = gap <= rule.eps_fixed
        if met and gap <= rule.gap_cap:
            status = "gap_met"
            break
        if chi_tol is not None:
            d = x_hat - sp.x_anchor
            chi = (math.sqrt(float(d @ d)) + math.sqrt(2.0 * alpha * gap)) / min(1.0, alpha)
            if chi <= chi_tol:
                status = "stationary"
                break
        if t >= limits.max_iter:
            break

        # projected arc search along the dual gradient
        grad = -(alpha * Ay + u)[gs.index]
        step = sigma
        for j in range(limits.max_backtracks + 1):
            y_new = project_dual_feasible(y + step * grad, gs)
            Ay_new = apply_A(y_new, gs)
            phid_new = _phi_dual_from_Ay(Ay_new, sp)
            if phid_new >= phid + limits.eta2 * float(grad @ (y_new - y)):
                break
            step *= limits.xi2
        else:
            # no step gives ascent measurable in floating point
            status = "stalled"
            break
        sigma = min(step / limits.xi2, limits.sigma_max) if j == 0 else step
        if np.array_equal(y_new, y):
            status = "stalled"
            break
        y, Ay, phid = y_new, Ay_new, phid_new
        t += 1

    return SubproblemResult(
        x_hat=x_hat,
        y_hat=y,
        gap=gap,
        inner_iters=t,
        status=status,
        eps_out=gap,
        phi=phi,
        phi_dual=phid,
        zero_set=mask,
        sigma=sigma,
        trace=trace,
    )


def solve_subproblem_enhanced(
    sp: ProxSubproblem,
    rule: TerminationRule,
    warm=None,
    limits: InnerLimits = InnerLimits(),
    sigma: float = 1.0,
    chi_tol: float | None = None,
    trace: bool = False,
) -> SubproblemResult:
    """Projected gradient ascent on the dual with hard zeroing of groups
    whose dual block sits safely inside its ball.

    Parameters
    ----------
    sp : ProxSubproblem
    rule : TerminationRule
    warm : array_like, optional
        Dual starting point; projected onto the feasible set first.
    limits : InnerLimits
    sigma : float
        Initial arc-search step. The step accepted last is returned in
        ``result.sigma`` so callers can carry it over.
    chi_tol : float, optional
        Also stop (status ``"stationary"``) once the anchor is certified
        stationary to this tolerance.
    trace : bool
        Record ``(t, phi, phi_d, gap, |P|)`` per inner iteration.

    Returns
    -------
    SubproblemResult
        ``status`` is ``"gap_met"``, ``"stationary"``, ``"iter_limit"`` or
        ``"stalled"`` (the arc search found no measurable ascent).
    """
    return _dual_ascent(sp, rule, warm, limits, sigma, True, chi_tol, trace)


def solve_subproblem_pga(
    sp: ProxSubproblem,
    rule: TerminationRule,
    warm=None,
    limits: InnerLimits = InnerLimits(),
    sigma: float = 1.0,
    chi_tol: float | None = None,
    trace: bool = False,
) -> SubproblemResult:
    """Plain projected gradient ascent: the primal candidate is always
    ``u + alpha A y``, so exact zeros essentially never appear."""
    return _dual_ascent(sp, rule, warm, limits, sigma, False, chi_tol, trace)


def correction_step(x_hat: np.ndarray, x_ref: np.ndarray, sp: ProxSubproblem) -> np.ndarray:
    """Zero every group of ``x_hat`` that is exactly zero in ``x_ref``; keep
    the result only if it does not increase ``phi``."""
    mask = group_norms(x_ref, sp.gs) == 0.0
    if not mask.any():
        return x_hat
    candidate = zero_groups(x_hat, sp.gs, mask)
    if phi_primal(candidate, sp) <= phi_primal(x_hat, sp):
        return candidate
    return x_hat
