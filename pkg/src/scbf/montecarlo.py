"""Batch trial execution and aggregation.

Trials are keyed by index: trial i always consumes the random stream
(base_seed, i), so the batch summary is a deterministic fold over trial index
regardless of execution order or parallelism degree.  Timing statistics are
wall-clock and therefore excluded from the determinism contract.
"""
from __future__ import annotations

import concurrent.futures
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .core import RngPolicy, Trajectory
from .problems import ProblemSpec, build_context, objective_accumulate
from .sde import simulate

__all__ = ["McConfig", "TrialRecord", "McSummary", "run_trial", "run_batch"]


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo batch configuration.

    ``store_every``: keep every k-th trajectory in the result (0 keeps none);
    statistics are computed from per-trial reductions and are invariant to
    this thinning.  ``parallelism`` > 1 runs trials in a process pool.
    """

    problem: ProblemSpec
    n_trials: int
    base_seed: int
    parallelism: int = 1
    store_every: int = 0

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")
        if self.store_every < 0:
            raise ValueError("store_every must be nonnegative")


@dataclass(frozen=True)
class TrialRecord:
    """Per-trial reduction used for batch aggregation."""

    trial_index: int
    n_states: int
    violation_indices: tuple
    terminal_state: float
    tail_mean_state: float
    objective: float
    solver_time_sum: float
    solver_time_max: float
    n_filter_calls: int
    error: Optional[str] = None


@dataclass(frozen=True)
class McSummary:
    """Aggregate safety, objective and timing statistics for a batch.

    ``safe_timestep_fraction`` counts grid states with h >= 0 over all grid
    states of all trials.  ``mean_tail_state`` averages, across trials, the
    time-average of the state over the final half of the horizon (the
    stabilized band for the advertising problems).  Solver times are in
    milliseconds.
    """

    n_trials: int
    n_failed_trials: int
    total_states: int
    violating_steps: int
    safe_timestep_fraction: float
    trials_with_violation: int
    mean_solver_time_ms: float
    max_solver_time_ms: float
    mean_terminal_state: float
    std_terminal_state: float
    mean_tail_state: float
    mean_objective: float
    base_seed: int
    per_trial_seeds: tuple

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_trial_seeds"] = [list(s) for s in self.per_trial_seeds]
        return d


def run_trial(spec: ProblemSpec, trial_index: int, base_seed: int) -> Trajectory:
    """Simulate one trial; deterministic given (spec, base_seed, trial_index)."""
    ctx = build_context(spec)
    return simulate(ctx, RngPolicy(base_seed=base_seed, trial_index=trial_index))


def _reduce(spec: ProblemSpec, trial_index: int, traj: Trajectory) -> TrialRecord:
    times = traj.grid.times()
    tail_start = traj.grid.t0 + 0.5 * (traj.grid.t_final - traj.grid.t0)
    tail = traj.x[times >= tail_start]
    return TrialRecord(
        trial_index=trial_index,
        n_states=traj.n_steps + 1,
        violation_indices=tuple(int(i) for i in traj.violating_indices()),
        terminal_state=traj.terminal_state,
        tail_mean_state=float(np.mean(tail)) if len(tail) else float("nan"),
        objective=objective_accumulate(spec.params, traj),
        solver_time_sum=float(np.sum(traj.solver_time)),
        solver_time_max=float(np.max(traj.solver_time)) if traj.n_steps else 0.0,
        n_filter_calls=traj.n_steps,
    )


def _run_one(args) -> tuple[TrialRecord, Optional[Trajectory]]:
    spec, trial_index, base_seed, keep = args
    try:
        traj = run_trial(spec, trial_index, base_seed)
    except Exception as exc:  # a failed trial is recorded, not fatal to the batch
        record = TrialRecord(
            trial_index=trial_index,
            n_states=0,
            violation_indices=(),
            terminal_state=float("nan"),
            tail_mean_state=float("nan"),
            objective=float("nan"),
            solver_time_sum=0.0,
            solver_time_max=0.0,
            n_filter_calls=0,
            error=f"{type(exc).__name__}: {exc}",
        )
        return record, None
    return _reduce(spec, trial_index, traj), (traj if keep else None)


def run_batch(cfg: McConfig) -> tuple[McSummary, list[TrialRecord], list[Trajectory]]:
    """Run a batch and aggregate in trial-index order.

    Returns (summary, per-trial records, stored trajectories).  Trajectory i
    is stored when store_every > 0 and i % store_every == 0.
    """
    keep = [cfg.store_every > 0 and i % cfg.store_every == 0 for i in range(cfg.n_trials)]
    jobs = [(cfg.problem, i, cfg.base_seed, keep[i]) for i in range(cfg.n_trials)]

    if cfg.parallelism == 1:
        results = [_run_one(job) for job in jobs]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            chunk = max(1, cfg.n_trials // (8 * cfg.parallelism))
            results = list(pool.map(_run_one, jobs, chunksize=chunk))

    records = [rec for rec, _ in results]
    stored = [traj for _, traj in results if traj is not None]

    ok = [r for r in records if r.error is None]
    total_states = sum(r.n_states for r in ok)
    violating = sum(len(r.violation_indices) for r in ok)
    calls = sum(r.n_filter_calls for r in ok)
    solver_sum = sum(r.solver_time_sum for r in ok)
    solver_max = max((r.solver_time_max for r in ok), default=0.0)
    terminals = np.array([r.terminal_state for r in ok]) if ok else np.array([float("nan")])

    summary = McSummary(
        n_trials=cfg.n_trials,
        n_failed_trials=len(records) - len(ok),
        total_states=total_states,
        violating_steps=violating,
        safe_timestep_fraction=(1.0 - violating / total_states) if total_states else float("nan"),
        trials_with_violation=sum(1 for r in ok if r.violation_indices),
        mean_solver_time_ms=(solver_sum / calls * 1e3) if calls else 0.0,
        max_solver_time_ms=solver_max * 1e3,
        mean_terminal_state=float(np.mean(terminals)),
        std_terminal_state=float(np.std(terminals)),
        mean_tail_state=float(np.mean([r.tail_mean_state for r in ok])) if ok else float("nan"),
        mean_objective=float(np.mean([r.objective for r in ok])) if ok else float("nan"),
        base_seed=cfg.base_seed,
        per_trial_seeds=tuple((cfg.base_seed, i) for i in range(cfg.n_trials)),
    )
    return summary, records, stored
