"""Configuration-driven entry point.

``scbf run --config cfg.json [--trials N] [--seed S] [--filter MODE] [--out DIR]``
executes a single trial or a Monte Carlo batch and writes artifacts for
external plotting; ``scbf validate --config cfg.json`` checks and echoes the
resolved configuration.  Precedence is flags > config file > defaults.

Outputs per run directory:
  * ``meta.json``       -- resolved config, per-field provenance, config hash;
  * ``trajectory.csv``  -- single mode (or thinned ``trajectory_<i>.csv`` in
    Monte Carlo mode when ``store_every`` > 0);
  * ``summary.json``    -- Monte Carlo mode, mirroring the batch summary.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import jsonschema

from . import __version__
from .core import TimeGrid, Trajectory
from .montecarlo import McConfig, run_batch, run_trial
from .problems import (
    DEFAULT_FILTER_MODES,
    DEFAULT_GRIDS,
    GRID_SOURCES,
    PARAM_SOURCES,
    PROBLEM_KINDS,
    ProblemSpec,
)

__all__ = ["RUN_CONFIG_SCHEMA", "ConfigError", "load_config", "resolve_config", "export_trajectory", "main"]


class ConfigError(ValueError):
    """Configuration file or flag combination is invalid."""


RUN_CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "scbf run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["problem", "mode"],
    "properties": {
        "problem": {"enum": sorted(PROBLEM_KINDS)},
        "mode": {"enum": ["single", "monte_carlo"]},
        "filter": {"enum": ["off", "cbf", "scbf", "scbf_legacy"]},
        "seed": {"type": "integer", "minimum": 0},
        "n_trials": {"type": "integer", "minimum": 1},
        "parallelism": {"type": "integer", "minimum": 1},
        "store_every": {"type": "integer", "minimum": 0},
        "out_dir": {"type": "string"},
        "eta": {"type": "number", "minimum": 0},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t0": {"type": "number"},
                "t_final": {"type": "number"},
                "dt": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "params": {"type": "object"},
    },
}

_NOTES = {
    "advertising": ["market share is clamped to [0, 1] after each step (implementer choice, logged as events)"],
    "stoch_advertising": ["market share is clamped to [0, 1] after each step (implementer choice, logged as events)"],
    "portfolio": [],
    "uncontrolled_stress": ["counterexample configuration: the filter has no control authority by construction"],
}


def load_config(path) -> dict:
    """Read and schema-validate a JSON config file."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(raw, RUN_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config violates schema: {exc.message}") from exc
    return raw


def resolve_config(raw: dict, overrides: dict | None = None) -> dict:
    """Merge defaults, file values and flag overrides into a resolved config.

    Returns a dict with the fully resolved run plus per-field provenance
    ("paper", "implementer-default" or "user").
    """
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    kind = raw["problem"]
    params_cls = PROBLEM_KINDS[kind]
    known_fields = {f.name for f in dataclasses.fields(params_cls)}

    user_params = dict(raw.get("params", {}))
    unknown = sorted(set(user_params) - known_fields)
    if unknown:
        raise ConfigError(f"unknown parameter(s) for problem {kind!r}: {', '.join(unknown)}")
    if "eta" in raw:
        user_params["eta"] = raw["eta"]
    if "eta" in overrides:
        user_params["eta"] = overrides["eta"]

    try:
        params = params_cls(**user_params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameters for problem {kind!r}: {exc}") from exc

    default_grid = DEFAULT_GRIDS[kind]
    grid_raw = dict(raw.get("grid", {}))
    grid_source = "user" if grid_raw else GRID_SOURCES[kind]
    try:
        grid = TimeGrid(
            t0=float(grid_raw.get("t0", default_grid.t0)),
            t_final=float(grid_raw.get("t_final", default_grid.t_final)),
            dt=float(grid_raw.get("dt", default_grid.dt)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc

    filter_mode = overrides.get("filter", raw.get("filter", DEFAULT_FILTER_MODES[kind]))
    if filter_mode == "cbf" and kind != "advertising":
        raise ConfigError("filter mode 'cbf' is only valid for the deterministic advertising problem")

    if kind == "portfolio" and params.withdrawal_time is not None:
        try:
            grid.index_of(params.withdrawal_time)
        except ValueError as exc:
            raise ConfigError(f"withdrawal_time must land on the grid: {exc}") from exc

    mode = raw["mode"]
    resolved = {
        "problem": kind,
        "mode": mode,
        "filter": filter_mode,
        "seed": int(overrides.get("seed", raw.get("seed", 0))),
        "n_trials": int(overrides.get("n_trials", raw.get("n_trials", 1))),
        "parallelism": int(raw.get("parallelism", 1)),
        "store_every": int(raw.get("store_every", 0)),
        "out_dir": str(overrides.get("out_dir", raw.get("out_dir", "runs/latest"))),
        "grid": {"t0": grid.t0, "t_final": grid.t_final, "dt": grid.dt},
        "params": dataclasses.asdict(params),
    }

    sources = dict(PARAM_SOURCES[kind])
    provenance = {}
    for name in sorted(known_fields):
        if name in user_params:
            provenance[f"params.{name}"] = "user"
        else:
            provenance[f"params.{name}"] = sources[name]
    provenance["grid"] = grid_source
    provenance["filter"] = "user" if ("filter" in raw or "filter" in overrides) else "implementer-default"

    return {"resolved": resolved, "provenance": provenance, "grid_obj": grid, "params_obj": params}


def _spec_from_resolved(res: dict) -> ProblemSpec:
    r = res["resolved"]
    return ProblemSpec(
        kind=r["problem"],
        params=res["params_obj"],
        filter_mode=r["filter"],
        grid=res["grid_obj"],
    )


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def export_trajectory(traj: Trajectory, path) -> None:
    """Write a trajectory as CSV: t,x,u_des,u_act,h,margin,intervened,event.

    One row per grid point; control columns are empty on the final row.
    Floats carry 17 significant digits so parsing the file reproduces the
    values bit-exactly.  A zero-step (empty-horizon) trajectory produces a
    header-only file.
    """
    path = Path(path)
    events_by_time: dict[float, list[str]] = {}
    for t, tag in traj.events:
        events_by_time.setdefault(t, []).append(tag)
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "x", "u_des", "u_act", "h", "margin", "intervened", "event"])
            n = traj.n_steps
            if n == 0:
                return
            times = traj.grid.times()
            for k in range(n + 1):
                t = float(times[k])
                tags = ";".join(events_by_time.get(t, []))
                if k < n:
                    row = [
                        _fmt(t),
                        _fmt(traj.x[k]),
                        _fmt(traj.u_des[k]),
                        _fmt(traj.u_act[k]),
                        _fmt(traj.h[k]),
                        _fmt(traj.margin[k]),
                        str(int(traj.intervened[k])),
                        tags,
                    ]
                else:
                    row = [_fmt(t), _fmt(traj.x[k]), "", "", _fmt(traj.h[k]), "", "", tags]
                writer.writerow(row)
    except OSError as exc:
        raise RuntimeError(f"failed to write trajectory to {path}: {exc}") from exc


def _write_meta(res: dict, out_dir: Path) -> None:
    resolved = res["resolved"]
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    meta = {
        "package_version": __version__,
        "config_resolved": resolved,
        "provenance": res["provenance"],
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "notes": _NOTES[resolved["problem"]],
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _cmd_validate(args) -> int:
    raw = load_config(args.config)
    res = resolve_config(raw)
    print(json.dumps({"resolved": res["resolved"], "provenance": res["provenance"]}, indent=2, sort_keys=True))
    return 0


def _cmd_run(args) -> int:
    raw = load_config(args.config)
    overrides = {
        "n_trials": args.trials,
        "seed": args.seed,
        "filter": args.filter,
        "out_dir": args.out,
    }
    res = resolve_config(raw, overrides)
    resolved = res["resolved"]
    spec = _spec_from_resolved(res)

    out_dir = Path(resolved["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_meta(res, out_dir)

    if resolved["mode"] == "single":
        traj = run_trial(spec, trial_index=0, base_seed=resolved["seed"])
        export_trajectory(traj, out_dir / "trajectory.csv")
        print(f"wrote {out_dir / 'trajectory.csv'}")
    else:
        cfg = McConfig(
            problem=spec,
            n_trials=resolved["n_trials"],
            base_seed=resolved["seed"],
            parallelism=resolved["parallelism"],
            store_every=resolved["store_every"],
        )
        summary, _records, stored = run_batch(cfg)
        (out_dir / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
        if cfg.store_every > 0:
            kept = [i for i in range(cfg.n_trials) if i % cfg.store_every == 0]
            for traj, idx in zip(stored, kept):
                export_trajectory(traj, out_dir / f"trajectory_{idx:04d}.csv")
        print(f"wrote {out_dir / 'summary.json'}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="scbf",
        description="Safety-filtered simulations of barrier-constrained control problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a single trial or Monte Carlo batch")
    p_run.add_argument("--config", required=True, help="path to a JSON run configuration")
    p_run.add_argument("--trials", type=int, default=None, help="override n_trials")
    p_run.add_argument("--seed", type=int, default=None, help="override the base seed")
    p_run.add_argument("--filter", choices=["off", "cbf", "scbf", "scbf_legacy"], default=None)
    p_run.add_argument("--out", default=None, help="override the output directory")

    p_val = sub.add_parser("validate", help="validate a configuration and echo the resolved run")
    p_val.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        return _cmd_run(args)
    except ConfigError as exc:
        json.dump({"error": "config", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except Exception as exc:  # runtime failure: machine-readable record, exit 3
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 3


def console_entry() -> None:
    raise SystemExit(main())
