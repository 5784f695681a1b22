"""Time stepping and the simulation loop.

Explicit Euler for ODEs and Euler-Maruyama for SDEs, the minimal schemes
consistent with per-step filtering: at each grid point the desired control is
filtered against the pre-step state, then the state is advanced one step.
Discontinuous events (e.g. a wealth withdrawal) are applied exactly at grid
points before the step's control is computed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .barrier import BoundaryError, SdeModel
from .core import RngPolicy, Trajectory, gaussian_increments
from .filters import filter_step

__all__ = ["StepInput", "euler_step", "em_step", "Event", "apply_event", "simulate"]


@dataclass(frozen=True)
class StepInput:
    """One integration step: state, control, step length, Brownian increment.

    ``dw`` is ignored by deterministic stepping.
    """

    x: float
    u: float
    dt: float
    dw: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")


def euler_step(model: SdeModel, s: StepInput) -> float:
    """Explicit Euler update x + dt*(f + g*u); requires zero diffusion."""
    if not model.deterministic:
        raise ValueError("euler_step requires a deterministic model; use em_step")
    return s.x + s.dt * (model.drift_f(s.x) + model.drift_g(s.x) * s.u)


def em_step(model: SdeModel, s: StepInput) -> float:
    """Euler-Maruyama update x + dt*(f + g*u) + sigma(x, u)*dw."""
    return (
        s.x
        + s.dt * (model.drift_f(s.x) + model.drift_g(s.x) * s.u)
        + model.diffusion_sigma(s.x, s.u) * s.dw
    )


@dataclass(frozen=True)
class Event:
    """Discontinuous state modification pinned to a grid time.

    kind "set_state" replaces the state with ``value``; kind "scale_state"
    multiplies it.  Event times must land exactly on the grid.
    """

    time: float
    kind: str
    value: float
    tag: str = ""

    def __post_init__(self):
        if self.kind not in ("set_state", "scale_state"):
            raise ValueError(f"unknown event kind {self.kind!r}")


def apply_event(event: Event, x: float) -> float:
    if event.kind == "set_state":
        return event.value
    return x * event.value


def simulate(ctx, policy: RngPolicy | None = None) -> Trajectory:
    """Run one filtered path for a problem context.

    Per step: apply any event scheduled at the grid point, record the state,
    evaluate the desired control, filter it against the pre-step state, and
    advance with Euler/Euler-Maruyama.  States that leave the model domain
    are clamped back and logged; states with h < 0 are recorded as violations
    rather than halting so batch statistics can count them.

    Stochastic safety runs must start strictly inside the safe set.
    """
    grid = ctx.grid
    model = ctx.model
    n = grid.n_steps
    dt = grid.dt

    if model.deterministic:
        dw = np.zeros(n)
    else:
        if policy is None:
            raise ValueError("a stochastic model requires an RngPolicy")
        dw = gaussian_increments(policy, n, dt)

    events_by_step: dict[int, list[Event]] = {}
    for ev in ctx.events:
        k = grid.index_of(ev.time)
        events_by_step.setdefault(k, []).append(ev)

    if ctx.filter_mode == "scbf" and ctx.barrier.h(ctx.x0) <= 0.0:
        raise BoundaryError(
            f"stochastic safety run must start in the interior of the safe set; h(x0)={ctx.barrier.h(ctx.x0):.6g}"
        )

    h_fn = ctx.barrier.h
    controller = ctx.controller

    xs = np.empty(n + 1)
    hs = np.empty(n + 1)
    u_des_arr = np.empty(n)
    u_act_arr = np.empty(n)
    margin_arr = np.empty(n)
    intervened_arr = np.empty(n, dtype=bool)
    solver_arr = np.empty(n)
    statuses: list[str] = []
    event_log: list[tuple[float, str]] = []

    x = float(ctx.x0)
    for k in range(n + 1):
        t = grid.point(k)
        for ev in events_by_step.get(k, ()):
            x = apply_event(ev, x)
            event_log.append((t, ev.tag or ev.kind))
        h_val = h_fn(x)
        xs[k] = x
        hs[k] = h_val
        if h_val < 0.0:
            event_log.append((t, "violation"))
        if k == n:
            break

        u_des = controller(x, t)
        outcome = filter_step(ctx, x, t, u_des)
        u_des_arr[k] = u_des
        u_act_arr[k] = outcome.u_act
        margin_arr[k] = outcome.margin_at_u_act
        intervened_arr[k] = outcome.intervened
        solver_arr[k] = outcome.solver_time
        statuses.append(outcome.status)
        if outcome.status == "boundary_error":
            event_log.append((t, "boundary_escalation"))

        x = em_step(model, StepInput(x=x, u=outcome.u_act, dt=dt, dw=float(dw[k])))
        if x < model.x_lo:
            x = model.x_lo
            event_log.append((grid.point(k + 1), "domain_clamp_lo"))
        elif x > model.x_hi:
            x = model.x_hi
            event_log.append((grid.point(k + 1), "domain_clamp_hi"))

    return Trajectory(
        grid=grid,
        x=xs,
        u_des=u_des_arr,
        u_act=u_act_arr,
        h=hs,
        margin=margin_arr,
        intervened=intervened_arr,
        solver_time=solver_arr,
        status=tuple(statuses),
        events=tuple(event_log),
    )
