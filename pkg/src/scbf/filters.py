"""Minimal-intervention safety filters.

Every program solved here is scalar: one control, one inequality constraint,
box bounds.  Projection onto the feasible set is therefore closed form, which
is both exact and far faster than a general-purpose QP/NLP solver.  A grid
search (``grid_project``) is retained as an independent oracle and safety
net.

``qp_filter`` handles constraints affine in u, ``nlp_filter`` handles the
quadratic-in-u constraints that arise when the diffusion depends on the
control, and ``filter_step`` assembles the right constraint for a problem
context and dispatches.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .barrier import (
    BoundaryError,
    legacy_scbf_margin,
    scbf_margin,
)

__all__ = [
    "STATUS_OK",
    "STATUS_CLAMPED",
    "STATUS_INFEASIBLE",
    "STATUS_BOUNDARY",
    "AffineConstraint",
    "QuadraticConstraint",
    "FilterOutcome",
    "qp_filter",
    "feasible_interval",
    "nlp_filter",
    "grid_project",
    "filter_step",
    "escalation_control",
    "FILTER_MODES",
]

STATUS_OK = "ok"
STATUS_CLAMPED = "clamped_to_bounds"
STATUS_INFEASIBLE = "infeasible_best_effort"
STATUS_BOUNDARY = "boundary_error"

FILTER_MODES = ("off", "cbf", "scbf", "scbf_legacy")

_INF = float("inf")


@dataclass(frozen=True)
class AffineConstraint:
    """Margin slope*u + intercept, feasible where the margin is >= 0."""

    slope: float
    intercept: float

    def margin(self, u):
        return self.slope * u + self.intercept


@dataclass(frozen=True)
class QuadraticConstraint:
    """Margin a2*u**2 + a1*u + a0, feasible where the margin is >= 0."""

    a2: float
    a1: float
    a0: float

    def margin(self, u):
        return (self.a2 * u + self.a1) * u + self.a0


@dataclass(frozen=True)
class FilterOutcome:
    """Result of one filter solve.

    ``intervened`` is exactly ``u_act != u_des``.  ``margin_at_u_act`` is NaN
    when no constraint was evaluated (mode off, or boundary escalation).
    ``solver_time`` is wall seconds for constraint assembly plus solve.
    """

    u_act: float
    intervened: bool
    margin_at_u_act: float
    solver_time: float
    status: str


def _best_effort_endpoint(margin: Callable[[float], float], u_des: float, lo: float, hi: float) -> float:
    """Bound endpoint with the largest margin; ties go to the point nearest u_des."""
    m_lo, m_hi = margin(lo), margin(hi)
    if m_lo > m_hi:
        return lo
    if m_hi > m_lo:
        return hi
    return lo if abs(u_des - lo) <= abs(u_des - hi) else hi


def qp_filter(u_des: float, c: AffineConstraint, bounds: Sequence[float]) -> FilterOutcome:
    """Closest point to u_des in {u in [lo, hi] : slope*u + intercept >= 0}.

    With a single affine constraint this is exact interval projection: the
    feasible set is [max(lo, theta), hi] or [lo, min(hi, theta)] with
    theta = -intercept/slope depending on the slope sign.  When the feasible
    set is empty the bound endpoint maximizing the margin is returned with
    status ``infeasible_best_effort``.
    """
    t_start = time.perf_counter()
    lo, hi = bounds
    if lo > hi:
        raise ValueError(f"invalid bounds [{lo}, {hi}]")

    slope = c.slope
    if slope == 0.0:
        if c.intercept >= 0.0:
            feas_lo, feas_hi = lo, hi
        else:
            feas_lo, feas_hi = _INF, -_INF
        theta = None
    elif slope > 0.0:
        theta = -c.intercept / slope
        feas_lo, feas_hi = max(lo, theta), hi
    else:
        theta = -c.intercept / slope
        feas_lo, feas_hi = lo, min(hi, theta)

    if feas_lo > feas_hi:
        u_act = _best_effort_endpoint(c.margin, u_des, lo, hi)
        status = STATUS_INFEASIBLE
    else:
        u_act = min(max(u_des, feas_lo), feas_hi)
        if u_act == u_des:
            status = STATUS_OK
        elif theta is not None and u_act == theta:
            status = STATUS_OK  # the safety constraint, not the box, is active
        else:
            status = STATUS_CLAMPED
    return FilterOutcome(
        u_act=u_act,
        intervened=(u_act != u_des),
        margin_at_u_act=c.margin(u_act),
        solver_time=time.perf_counter() - t_start,
        status=status,
    )


def _quadratic_roots(a2: float, a1: float, a0: float) -> tuple[float, float]:
    """Real roots of a2*u**2 + a1*u + a0 (a2 != 0, discriminant >= 0), ascending.

    Uses the numerically stable split to avoid cancellation.
    """
    disc = a1 * a1 - 4.0 * a2 * a0
    sq = math.sqrt(max(disc, 0.0))
    if a1 >= 0.0:
        q = -0.5 * (a1 + sq)
    else:
        q = -0.5 * (a1 - sq)
    if q != 0.0:
        r1, r2 = q / a2, a0 / q
    else:
        r1 = r2 = 0.0  # a1 == 0 and disc == 0 implies a double root at the origin
    return (r1, r2) if r1 <= r2 else (r2, r1)


def feasible_interval(q: QuadraticConstraint) -> tuple[tuple[float, float], ...]:
    """Solution set of a2*u**2 + a1*u + a0 >= 0 as a tuple of closed intervals.

    Concave case (a2 < 0): a single interval between the roots, or empty.
    Convex case (a2 > 0): everything, or the complement of the open root
    interval (two rays, reduced against bounds by the caller).  a2 == 0
    delegates to the affine logic.
    """
    if q.a2 == 0.0:
        if q.a1 == 0.0:
            return ((-_INF, _INF),) if q.a0 >= 0.0 else ()
        theta = -q.a0 / q.a1
        return ((theta, _INF),) if q.a1 > 0.0 else ((-_INF, theta),)

    disc = q.a1 * q.a1 - 4.0 * q.a2 * q.a0
    if q.a2 < 0.0:
        if disc < 0.0:
            return ()
        r_lo, r_hi = _quadratic_roots(q.a2, q.a1, q.a0)
        return ((r_lo, r_hi),)
    if disc <= 0.0:
        return ((-_INF, _INF),)
    r_lo, r_hi = _quadratic_roots(q.a2, q.a1, q.a0)
    return ((-_INF, r_lo), (r_hi, _INF))


def nlp_filter(u_des: float, q: QuadraticConstraint, bounds: Sequence[float]) -> FilterOutcome:
    """Exact projection of u_des onto the quadratic constraint's feasible set.

    The feasible set of a scalar quadratic inequality is one or two
    intervals, so projection is closed form: u_des itself or the nearest
    interval endpoint.  When the feasible set misses the bounds entirely the
    argmax of the margin over the bounds is returned with status
    ``infeasible_best_effort``.
    """
    t_start = time.perf_counter()
    lo, hi = bounds
    if lo > hi:
        raise ValueError(f"invalid bounds [{lo}, {hi}]")

    pieces = []
    root_points = set()
    for seg_lo, seg_hi in feasible_interval(q):
        if math.isfinite(seg_lo):
            root_points.add(seg_lo)
        if math.isfinite(seg_hi):
            root_points.add(seg_hi)
        a, b = max(seg_lo, lo), min(seg_hi, hi)
        if a <= b:
            pieces.append((a, b))

    if not pieces:
        candidates = [lo, hi]
        if q.a2 != 0.0:
            vertex = -q.a1 / (2.0 * q.a2)
            if lo < vertex < hi:
                candidates.append(vertex)
        u_act = max(candidates, key=lambda u: (q.margin(u), -abs(u - u_des)))
        status = STATUS_INFEASIBLE
    else:
        best = None
        for a, b in pieces:
            cand = min(max(u_des, a), b)
            dist = abs(cand - u_des)
            if best is None or dist < best[0]:
                best = (dist, cand)
        u_act = best[1]
        if u_act == u_des:
            status = STATUS_OK
        elif u_act in root_points:
            status = STATUS_OK  # clamped by the safety constraint itself
        else:
            status = STATUS_CLAMPED
    return FilterOutcome(
        u_act=u_act,
        intervened=(u_act != u_des),
        margin_at_u_act=q.margin(u_act),
        solver_time=time.perf_counter() - t_start,
        status=status,
    )


def grid_project(
    u_des: float,
    margin: Callable[[np.ndarray], np.ndarray],
    bounds: Sequence[float],
    n: int = 10_000,
) -> Optional[float]:
    """Brute-force projection oracle: nearest feasible point on a uniform grid.

    Returns None when no grid point is feasible.  Resolution n is the number
    of cells over the bounds; accuracy is one grid cell.
    """
    lo, hi = bounds
    grid = np.linspace(lo, hi, n + 1)
    feasible = np.asarray(margin(grid)) >= 0.0
    if not feasible.any():
        return None
    candidates = grid[feasible]
    return float(candidates[np.argmin(np.abs(candidates - u_des))])


def escalation_control(ctx, x: float) -> float:
    """Fallback control once the state has left the interior of the safe set.

    Picks, among {0, u_lo, u_hi} intersected with the bounds, the control
    with the smallest diffusion magnitude, breaking ties by the largest
    deterministic drift of h.  Cutting noise first and then steering h upward
    is what allows recovery in all the problems handled here.
    """
    model, spec = ctx.model, ctx.barrier
    candidates = {model.u_lo, model.u_hi}
    if model.u_lo <= 0.0 <= model.u_hi:
        candidates.add(0.0)
    dh = spec.dh_dx(x)
    f = model.drift_f(x)
    g = model.drift_g(x)

    def key(u):
        return (abs(model.diffusion_sigma(x, u)), -(dh * (f + g * u)))

    return min(sorted(candidates), key=key)


def _fit_margin_quadratic(margin: Callable[[float], float], u_scale: float):
    """Exact quadratic coefficients of a margin that is polynomial (<=2) in u.

    Evaluates the margin at three symmetric nodes and checks the fit at a
    fourth point, so a model whose margin is not quadratic in the control is
    rejected instead of silently mis-filtered.
    """
    m0 = margin(0.0)
    mp = margin(u_scale)
    mm = margin(-u_scale)
    a1 = (mp - mm) / (2.0 * u_scale)
    a2 = (mp + mm - 2.0 * m0) / (2.0 * u_scale * u_scale)
    u_chk = 0.5 * u_scale
    m_chk = margin(u_chk)
    fit_chk = (a2 * u_chk + a1) * u_chk + m0
    scale = max(1.0, abs(m0), abs(mp), abs(mm))
    if abs(fit_chk - m_chk) > 1e-8 * scale:
        raise RuntimeError("constraint margin is not quadratic in the control; cannot assemble filter")
    # Affine margins produce |a2| at roundoff level; snap it to zero so the
    # affine projection path is used.
    if abs(a2) * u_scale * u_scale <= 1e-9 * scale:
        a2 = 0.0
    return a2, a1, m0


def filter_step(ctx, x: float, t: float, u_des: float) -> FilterOutcome:
    """Assemble the active safety constraint at (x, t) and filter u_des.

    Dispatch:
      * mode "off": clip to bounds, no constraint (margin NaN);
      * mode "cbf": deterministic barrier constraint, affine in u;
      * mode "scbf": corrected stochastic condition; affine when the
        diffusion ignores u, quadratic when it does not;
      * mode "scbf_legacy": the superseded condition, for comparison runs.

    A BoundaryError from the stochastic condition (state at or past the
    boundary) is converted into a boundary_error outcome that applies the
    escalation control.  solver_time covers assembly plus solve.
    """
    t_start = time.perf_counter()
    model = ctx.model
    bounds = (model.u_lo, model.u_hi)
    mode = ctx.filter_mode

    if mode == "off":
        u_act = min(max(u_des, model.u_lo), model.u_hi)
        return FilterOutcome(
            u_act=u_act,
            intervened=(u_act != u_des),
            margin_at_u_act=float("nan"),
            solver_time=time.perf_counter() - t_start,
            status=STATUS_OK,
        )

    if mode == "cbf":
        if not model.deterministic:
            raise ValueError("filter mode 'cbf' requires a deterministic model; use 'scbf'")
        dh = ctx.barrier.dh_dx(x)
        c = AffineConstraint(
            slope=dh * model.drift_g(x),
            intercept=dh * model.drift_f(x) + ctx.alpha(ctx.barrier.h(x)),
        )
        out = qp_filter(u_des, c, bounds)
        return replace(out, solver_time=time.perf_counter() - t_start)

    if mode == "scbf":
        def margin(u):
            return scbf_margin(ctx.barrier, model, ctx.alpha, x, u)
    elif mode == "scbf_legacy":
        def margin(u):
            return legacy_scbf_margin(ctx.barrier, model, ctx.alpha, x, u)
    else:
        raise ValueError(f"unknown filter mode {mode!r}")

    u_scale = max(1.0, 0.5 * (abs(model.u_lo) + abs(model.u_hi)))
    try:
        a2, a1, a0 = _fit_margin_quadratic(margin, u_scale)
    except BoundaryError:
        u_act = escalation_control(ctx, x)
        return FilterOutcome(
            u_act=u_act,
            intervened=(u_act != u_des),
            margin_at_u_act=float("nan"),
            solver_time=time.perf_counter() - t_start,
            status=STATUS_BOUNDARY,
        )

    if a2 == 0.0:
        out = qp_filter(u_des, AffineConstraint(slope=a1, intercept=a0), bounds)
    else:
        out = nlp_filter(u_des, QuadraticConstraint(a2=a2, a1=a1, a0=a0), bounds)
    return replace(out, solver_time=time.perf_counter() - t_start)
