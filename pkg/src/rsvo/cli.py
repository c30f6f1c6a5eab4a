"""Command line entry point: ``rsvo simulate | sweep | metrics``.

Exit codes: 0 success, 1 invalid input (bad arguments, config or
validation failure), 2 runtime failure (unsafe start, infeasible QP, I/O).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from .errors import ParseError, RsvoError, ValidationError
from .outputs import SUMMARY_FILE, TRAJECTORY_FILE, read_metrics, write_json, write_outputs
from .scenarios import load_scenario, run_scenario, run_sweep

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("rsvo")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rsvo", description="Responsibility-weighted decentralized safe control simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one scenario")
    s.add_argument("--scenario", required=True, help="preset name or YAML file")
    s.add_argument("--symmetric", action="store_true", help="force equal responsibility on every pair")
    s.add_argument("--out", type=Path, help="directory for CSV/JSON outputs")
    s.add_argument("--seed", type=int)
    s.add_argument("--dt", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--steps", type=int, help="maximum number of steps")

    w = sub.add_parser("sweep", help="run both modes over random personality draws")
    w.add_argument("--scenario", required=True)
    w.add_argument("--seeds", type=int, required=True)
    w.add_argument("--theta-min", type=float, required=True)
    w.add_argument("--theta-max", type=float, required=True)
    w.add_argument("--out", type=Path, required=True)
    w.add_argument("--seed", type=int, help="first seed (default: the scenario's seed)")

    m = sub.add_parser("metrics", help="recompute summaries from trajectory CSVs")
    m.add_argument("--in", dest="in_dir", type=Path, required=True)
    return p


def _overrides(cfg, args):
    sim = cfg.sim
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.steps is not None:
        changes["max_steps"] = args.steps
    if args.symmetric:
        changes["symmetric"] = True
    try:
        if args.dt is not None:
            changes["dynamics"] = dataclasses.replace(sim.dynamics, dt=args.dt)
        if args.gamma is not None:
            changes["cbf"] = dataclasses.replace(sim.cbf, gamma=args.gamma)
        return cfg.with_sim(**changes)
    except ValueError as exc:
        raise ValidationError("arguments", str(exc)) from None


def cmd_simulate(args) -> int:
    cfg = _overrides(load_scenario(args.scenario), args)
    log_, metrics = run_scenario(cfg)
    if args.out is not None:
        write_outputs(log_, metrics, args.out, cfg)
    report = metrics.to_dict()
    report.pop("min_distance_series")
    report.pop("avg_min_distance")
    report.update(
        scenario=cfg.name,
        mode="symmetric" if cfg.sim.symmetric else "asymmetric",
        n_steps=log_.n_steps,
        min_distance=float(metrics.min_distance_series.min()),
        slack_events=log_.slack_events,
        deadlock_duration_steps=metrics.deadlock_duration_steps,
    )
    print(json.dumps(report, indent=2))
    return 0


def cmd_sweep(args) -> int:
    cfg = load_scenario(args.scenario)
    if not args.theta_min < args.theta_max:
        raise ValidationError("theta-min", "must be below --theta-max")
    if args.theta_min < 0:
        raise ValidationError("theta-min", "must be non-negative")
    if args.seeds < 1:
        raise ValidationError("seeds", "must be at least 1")
    summary = run_sweep(cfg, args.seeds, (args.theta_min, args.theta_max), args.out, args.seed)
    print(json.dumps({
        "seeds": summary.seeds,
        "mean_completion_step": summary.mean_completion_step,
        "mean_deadlock_steps": summary.mean_deadlock_steps,
        "incomplete_runs": summary.incomplete_runs,
        "improvement_pct": summary.improvement_pct,
    }, indent=2))
    return 0


def cmd_metrics(args) -> int:
    root = args.in_dir
    if not root.is_dir():
        raise ValidationError("in", f"{root} is not a directory")
    run_dirs = sorted(p.parent for p in root.rglob(TRAJECTORY_FILE))
    if not run_dirs:
        raise ValidationError("in", f"no {TRAJECTORY_FILE} under {root}")
    out = {}
    for d in run_dirs:
        metrics = read_metrics(d)
        write_json(metrics.to_dict(), d / SUMMARY_FILE)
        out[str(d.relative_to(root)) if d != root else "."] = {
            "completion_step": metrics.completion_step,
            "deadlock_start_step": metrics.deadlock_start_step,
            "deadlock_end_step": metrics.deadlock_end_step,
            "min_distance": float(metrics.min_distance_series.min()),
        }
    print(json.dumps(out, indent=2))
    return 0


def _setup_logging():
    level_name = os.environ.get("RSVO_LOG_LEVEL", "warn").strip().lower()
    logging.basicConfig(level=LOG_LEVELS.get(level_name, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if level_name not in LOG_LEVELS:
        log.warning("unknown RSVO_LOG_LEVEL %r, using warn", level_name)


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    handlers = {"simulate": cmd_simulate, "sweep": cmd_sweep, "metrics": cmd_metrics}
    try:
        return handlers[args.command](args)
    except (ValidationError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RsvoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
