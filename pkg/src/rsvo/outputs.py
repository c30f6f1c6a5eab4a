"""Trajectory, pairwise and summary files for one run, and reading them back.

Floats are written with ``repr`` (shortest round-trip decimal), so a file
read back reproduces the logged values bit for bit. Files are UTF-8 with LF
line endings.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import IoError
from .sim import Metrics, TrajectoryLog, metrics_from_arrays, stall_flags

TRAJECTORY_HEADER = ["step", "time_s", "agent_id", "x", "y", "vx", "vy",
                     "ux_nom", "uy_nom", "ux", "uy", "qp_status", "slack"]
PAIRWISE_HEADER = ["step", "i", "j", "h", "dist", "omega_i"]

TRAJECTORY_FILE = "trajectory.csv"
PAIRWISE_FILE = "pairwise.csv"
SUMMARY_FILE = "summary.json"
SCENARIO_FILE = "scenario.yaml"
RUN_FILE = "run.json"


def _f(x) -> str:
    return repr(float(x))


def _open(path, mode):
    try:
        return open(path, mode, encoding="utf-8", newline="")
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from None


def write_json(obj, path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(path.parent, exc.strerror or str(exc)) from None
    with _open(path, "w") as fh:
        json.dump(obj, fh, indent=2, allow_nan=True)
        fh.write("\n")


def write_trajectory(log_: TrajectoryLog, path) -> None:
    with _open(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for t in range(log_.n_steps):
            time_s = _f(t * log_.dt)
            for i, aid in enumerate(log_.ids):
                w.writerow([
                    t, time_s, aid,
                    _f(log_.x[t, i, 0]), _f(log_.x[t, i, 1]),
                    _f(log_.v[t, i, 0]), _f(log_.v[t, i, 1]),
                    _f(log_.u_nom[t, i, 0]), _f(log_.u_nom[t, i, 1]),
                    _f(log_.u[t, i, 0]), _f(log_.u[t, i, 1]),
                    log_.status[t, i], _f(log_.slack[t, i]),
                ])


def write_pairwise(log_: TrajectoryLog, path) -> None:
    """One row per ordered pair and step; ``omega_i`` is i's share against j."""
    n = log_.n_agents
    with _open(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PAIRWISE_HEADER)
        for t in range(log_.n_steps):
            for i in range(n):
                for j in range(n):
                    if i == j:
                        continue
                    dist = float(np.linalg.norm(log_.x[t, i] - log_.x[t, j]))
                    w.writerow([t, log_.ids[i], log_.ids[j], _f(log_.h[t, i, j]), _f(dist), _f(log_.omega[t, i, j])])


def write_outputs(log_: TrajectoryLog, metrics: Metrics, out_dir, scenario=None) -> None:
    """Write the trajectory and pairwise CSVs plus the summary JSON into ``out_dir``.

    With ``scenario`` the config is stored next to them, which is what
    ``read_metrics`` needs to recompute the summary later.
    """
    from .scenarios import write_scenario

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(out, exc.strerror or str(exc)) from None
    write_trajectory(log_, out / TRAJECTORY_FILE)
    write_pairwise(log_, out / PAIRWISE_FILE)
    write_json(metrics.to_dict(), out / SUMMARY_FILE)
    if scenario is not None:
        try:
            write_scenario(scenario, out / SCENARIO_FILE)
        except OSError as exc:
            raise IoError(out / SCENARIO_FILE, exc.strerror or str(exc)) from None
        write_json({
            "scenario": scenario.name,
            "mode": "symmetric" if scenario.sim.symmetric else "asymmetric",
            "thetas": [float(a.theta) for a in scenario.agents],
            "seed": scenario.sim.seed,
            "n_steps": log_.n_steps,
            "slack_events": log_.slack_events,
            "max_incursion": metrics.max_incursion,
        }, out / RUN_FILE)


def read_trajectory(path):
    """Positions ``(T, N, 2)``, agent ids and ``dt`` from a trajectory CSV."""
    try:
        with _open(path, "r") as fh:
            rows = list(csv.reader(fh))
    except UnicodeDecodeError as exc:
        raise IoError(path, str(exc)) from None
    if not rows or rows[0] != TRAJECTORY_HEADER:
        raise IoError(path, "missing or unexpected trajectory header")
    body = rows[1:]
    if not body:
        raise IoError(path, "no data rows")
    ids = []
    for r in body:
        if r[0] != body[0][0]:
            break
        ids.append(r[2])
    n = len(ids)
    if len(body) % n:
        raise IoError(path, "row count is not a multiple of the agent count")
    T = len(body) // n
    x = np.array([[float(r[3]), float(r[4])] for r in body]).reshape(T, n, 2)
    dt = float(body[n][1]) if T > 1 else None
    return x, ids, dt


def read_metrics(run_dir) -> Metrics:
    """Recompute a run's metrics from its trajectory CSV and stored scenario."""
    from .scenarios import load_scenario

    run_dir = Path(run_dir)
    cfg_path = run_dir / SCENARIO_FILE
    if not cfg_path.is_file():
        raise IoError(cfg_path, "scenario file missing; cannot recompute metrics")
    cfg = load_scenario(cfg_path)
    x, _, _ = read_trajectory(run_dir / TRAJECTORY_FILE)
    goals = np.array([a.goal for a in cfg.agents])
    dt = cfg.sim.dynamics.dt
    deadlocked, active = stall_flags(cfg.sim, x, goals)
    at_goal = np.linalg.norm(x[-1] - goals, axis=1) <= cfg.sim.goal_tolerance
    completion = x.shape[0] - 1 if np.all(at_goal) else None
    return metrics_from_arrays(x, deadlocked, active, completion, dt, cfg.sim.cbf.r_safe)
