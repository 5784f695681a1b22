"""Shared scalar building blocks: time grids, strengthening functions, RNG
streams and the trajectory record produced by every simulation.

All types here are immutable values and safe to share across threads or
processes.  Random streams are keyed by (base_seed, trial_index) so a trial
reproduces bit-exactly no matter where or in what order it runs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TimeGrid",
    "StrengtheningFn",
    "alpha_eval",
    "RngPolicy",
    "gaussian_increments",
    "Trajectory",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid on [t0, t_final] with step dt.

    Grid points are always computed from the index (t0 + k*dt), never by
    repeated addition, so there is no cumulative floating-point drift.
    """

    t0: float
    t_final: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_final < self.t0:
            raise ValueError(f"t_final={self.t_final} must be >= t0={self.t0}")

    @property
    def n_steps(self) -> int:
        return int(round((self.t_final - self.t0) / self.dt))

    def point(self, k: int) -> float:
        return self.t0 + k * self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Grid index of time t; raises if t is not on the grid."""
        k = int(round((t - self.t0) / self.dt))
        if k < 0 or k > self.n_steps or abs(self.point(k) - t) > tol * max(1.0, self.dt):
            raise ValueError(f"time {t} does not fall on the grid (t0={self.t0}, dt={self.dt})")
        return k


@dataclass(frozen=True)
class StrengtheningFn:
    """Class-kappa-infinity strengthening function, linear form alpha(h) = eta*h.

    The ``form`` tag exists so nonlinear shapes can be added later without
    changing call sites; only "linear" is implemented.
    """

    eta: float
    form: str = "linear"

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if self.form != "linear":
            raise ValueError(f"unsupported strengthening form {self.form!r}")

    def __call__(self, h_val: float) -> float:
        return self.eta * h_val


def alpha_eval(fn: StrengtheningFn, h_val: float) -> float:
    """Evaluate a strengthening function at h_val."""
    return fn(h_val)


@dataclass(frozen=True)
class RngPolicy:
    """Deterministic per-trial random stream policy.

    The Gaussian increment stream of a trial is a pure function of
    (base_seed, trial_index): trial streams are independent of execution
    order and of each other.
    """

    base_seed: int
    trial_index: int = 0

    def __post_init__(self):
        if not (0 <= int(self.base_seed) < 2**64):
            raise ValueError("base_seed must fit in an unsigned 64-bit integer")
        if self.trial_index < 0:
            raise ValueError("trial_index must be nonnegative")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=int(self.base_seed), spawn_key=(int(self.trial_index),))
        return np.random.default_rng(seq)


def gaussian_increments(policy: RngPolicy, n: int, dt: float) -> np.ndarray:
    """n independent draws from Normal(0, dt), deterministic given the policy.

    These are Brownian increments over steps of length dt (variance dt,
    standard deviation sqrt(dt)).
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not dt > 0:
        raise ValueError("dt must be positive")
    return policy.generator().normal(0.0, np.sqrt(dt), size=n)


@dataclass(frozen=True)
class Trajectory:
    """Record of one simulated path.

    State-indexed arrays (x, h) have length n_steps+1; step-indexed arrays
    (controls, margins, flags, timings) have length n_steps.  ``events`` is a
    list of (time, tag) pairs for discontinuous happenings (withdrawals,
    domain clamps, safety violations, boundary escalations).

    ``solver_time`` holds wall-clock filter timings and is diagnostic only:
    the determinism contract covers every other field.
    """

    grid: TimeGrid
    x: np.ndarray
    u_des: np.ndarray
    u_act: np.ndarray
    h: np.ndarray
    margin: np.ndarray
    intervened: np.ndarray
    solver_time: np.ndarray
    status: tuple
    events: tuple

    def __post_init__(self):
        n = self.grid.n_steps
        if len(self.x) != n + 1 or len(self.h) != n + 1:
            raise ValueError("state sequences must have length n_steps+1")
        for name in ("u_des", "u_act", "margin", "intervened", "solver_time"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} must have length n_steps")
        if len(self.status) != n:
            raise ValueError("status must have length n_steps")

    @property
    def n_steps(self) -> int:
        return self.grid.n_steps

    @property
    def terminal_state(self) -> float:
        return float(self.x[-1])

    def violating_indices(self) -> np.ndarray:
        """Grid indices where the barrier value is negative (unsafe states)."""
        return np.flatnonzero(self.h < 0.0)
