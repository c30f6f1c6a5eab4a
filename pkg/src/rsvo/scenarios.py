"""Scenario definitions, YAML config files and multi-seed sweeps.

A scenario is a ``SimConfig`` plus the agents' initial states. Configs are
stored as YAML mappings (see the README for the grammar); the built-in
presets are addressable by name and need no file.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .behaviors import DeadlockHeuristic, NominalController
from .cbf import CbfParams
from .dynamics import AgentState, DynamicsModel
from .errors import ParseError, RsvoError, ValidationError
from .sim import Metrics, SimConfig, compute_metrics, run
from .svo import theta_ratio_for_weight

log = logging.getLogger(__name__)

KINDS = ("swap", "ramp", "circular", "custom")
MODES = ("symmetric", "asymmetric")


@dataclass
class ScenarioConfig:
    name: str
    kind: str
    sim: SimConfig
    agents: list
    # ramp scenarios only: the point where both lanes join
    merge_point: Optional[tuple] = None
    output_dir: Optional[str] = None

    def __eq__(self, other):
        if not isinstance(other, ScenarioConfig):
            return NotImplemented
        return scenario_to_dict(self) == scenario_to_dict(other)

    def with_sim(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, sim=dataclasses.replace(self.sim, **changes))

    def with_thetas(self, thetas) -> "ScenarioConfig":
        if len(thetas) != len(self.agents):
            raise ValueError(f"need {len(self.agents)} thetas, got {len(thetas)}")
        agents = [dataclasses.replace(a, theta=float(t)) for a, t in zip(self.agents, thetas)]
        return dataclasses.replace(self, agents=agents)


# ---------------------------------------------------------------- presets

def swap_scenario(theta1=1.0, theta2=1.0, r_safe=1.0, name="swap") -> ScenarioConfig:
    """Two agents trading places along the diagonal of a 10 m square."""
    sim = SimConfig(
        dynamics=DynamicsModel("single_integrator", 0.01),
        cbf=CbfParams(gamma=1.0, r_safe=r_safe),
        u_min=(-1.0, -1.0),
        u_max=(1.0, 1.0),
        controller=NominalController(gain_k=0.5),
        max_steps=4000,
    )
    agents = [
        AgentState(1, [0.0, 0.0], theta=theta1, goal=[10.0, 10.0]),
        AgentState(2, [10.0, 10.0], theta=theta2, goal=[0.0, 0.0]),
    ]
    return ScenarioConfig(name, "swap", sim, agents)


def _swap_weighted(omega1, r_safe, name):
    # theta1 / (theta1 + theta2) fixes omega1; scale so the scores sum to one
    ratio = theta_ratio_for_weight(omega1)
    return swap_scenario(ratio, 1.0 - ratio, r_safe, name)


RAMP_CASES = {
    # equal scores: both vehicles share every bound
    1: (1.0, 1.0),
    # vehicle 2 altruistic
    2: (1.0, 3.0),
    # both egoistic, vehicle 2 more so
    3: (2.0, 1.0),
}


def ramp_scenario(case=1, name=None) -> ScenarioConfig:
    """Two vehicles on lanes mirrored about the main lane, merging at Y = 70 m.

    Both start 40 m from the merge point on lanes 30 degrees either side of
    the main lane, cruising at 15 m/s parallel to it. The lane-keeping
    nominal pulls each toward the main-lane centerline and a shared point
    60 m past the merge.
    """
    theta1, theta2 = RAMP_CASES[case]
    merge = (0.0, 70.0)
    beta, dist, cruise = math.radians(30.0), 40.0, 15.0
    sx, sy = dist * math.sin(beta), merge[1] - dist * math.cos(beta)
    sim = SimConfig(
        dynamics=DynamicsModel("double_integrator", 0.01),
        cbf=CbfParams(gamma=1.0, r_safe=2.0, gamma2=1.0),
        u_min=(-5.0, -5.0),
        u_max=(5.0, 5.0),
        controller=NominalController(
            kind="lane_follow", gain_k=0.2, lane_axis=(0.0, 1.0), lane_point=merge,
            lateral_gain=1.0, v_max=cruise, velocity_gain=1.0,
        ),
        max_steps=800,
    )
    goal = [0.0, 130.0]
    agents = [
        AgentState(1, [-sx, sy], v=[0.0, cruise], theta=theta1, goal=goal),
        AgentState(2, [sx, sy], v=[0.0, cruise], theta=theta2, goal=goal),
    ]
    return ScenarioConfig(name or f"ramp-case{case}", "ramp", sim, agents, merge_point=merge)


def circular_scenario(n=6, radius=4.0, thetas=None, name=None) -> ScenarioConfig:
    """``n`` agents evenly spaced on a circle, each heading to the opposite point.

    Default scores alternate 2.5 / 1.0 around the ring.
    """
    if thetas is None:
        thetas = [2.5 if i % 2 == 0 else 1.0 for i in range(n)]
    sim = SimConfig(
        dynamics=DynamicsModel("single_integrator", 0.01),
        cbf=CbfParams(gamma=10.0, r_safe=1.0),
        u_min=(-2.0, -2.0),
        u_max=(2.0, 2.0),
        controller=NominalController(gain_k=2.0, v_max=1.0),
        heuristic=DeadlockHeuristic(rotation_angle=0.33 * math.pi),
        max_steps=6000,
    )
    agents = []
    for i in range(n):
        a = 2.0 * math.pi * i / n
        p = [radius * math.cos(a), radius * math.sin(a)]
        agents.append(AgentState(i + 1, p, theta=thetas[i], goal=[-p[0], -p[1]]))
    return ScenarioConfig(name or f"circular{n}", "circular", sim, agents)


PRESETS = {
    "swap": lambda: swap_scenario(name="swap"),
    "swap-r2": lambda: swap_scenario(r_safe=2.0, name="swap-r2"),
    "swap-egoist": lambda: _swap_weighted(0.8, 1.0, "swap-egoist"),
    "swap-egoist-r2": lambda: _swap_weighted(0.8, 2.0, "swap-egoist-r2"),
    "swap-altruist": lambda: _swap_weighted(0.2, 1.0, "swap-altruist"),
    "swap-altruist-r2": lambda: _swap_weighted(0.2, 2.0, "swap-altruist-r2"),
    "ramp": lambda: ramp_scenario(1, "ramp"),
    "ramp-case1": lambda: ramp_scenario(1),
    "ramp-case2": lambda: ramp_scenario(2),
    "ramp-case3": lambda: ramp_scenario(3),
    "circular6": lambda: circular_scenario(6),
}


def preset(name: str) -> ScenarioConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValidationError("scenario", f"unknown preset {name!r}; known: {', '.join(PRESETS)}") from None


# ------------------------------------------------------- dict conversion

def _vec(a):
    return [float(c) for c in a]


def _opt_vec(a):
    return None if a is None else _vec(a)


def _opt_float(x):
    return None if x is None else float(x)


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    s = cfg.sim
    c = s.controller
    hz = s.heuristic
    return {
        "name": cfg.name,
        "kind": cfg.kind,
        "dynamics": {"kind": s.dynamics.kind.value, "dt": float(s.dynamics.dt)},
        "cbf": {"gamma": float(s.cbf.gamma), "gamma2": float(s.cbf.gamma2), "r_safe": float(s.cbf.r_safe)},
        "u_min": _vec(s.u_min),
        "u_max": _vec(s.u_max),
        "controller": {
            "kind": c.kind.value,
            "gain_k": float(c.gain_k),
            "lane_axis": _vec(c.lane_axis),
            "lane_point": _opt_vec(c.lane_point),
            "lateral_gain": _opt_float(c.lateral_gain),
            "v_max": _opt_float(c.v_max),
            "velocity_gain": float(c.velocity_gain),
        },
        "heuristic": {
            "enabled": bool(hz.enabled),
            "rotation_angle": float(hz.rotation_angle),
            "trigger_progress_eps": _opt_float(hz.trigger_progress_eps),
            "trigger_window": int(hz.trigger_window),
            "activation_h": _opt_float(hz.activation_h),
        },
        "max_steps": int(s.max_steps),
        "goal_tolerance": float(s.goal_tolerance),
        "seed": int(s.seed),
        "symmetric": bool(s.symmetric),
        "relax": bool(s.relax),
        "slack_penalty": float(s.slack_penalty),
        "neighbor_radius": _opt_float(s.neighbor_radius),
        "merge_point": _opt_vec(cfg.merge_point),
        "output_dir": cfg.output_dir,
        "agents": [
            {"id": a.id, "x": _vec(a.x), "v": _vec(a.v), "theta": float(a.theta), "goal": _vec(a.goal)}
            for a in cfg.agents
        ],
    }


class _Reader:
    """Typed access to one mapping of a config document, with field paths."""

    def __init__(self, data, path, lines):
        if not isinstance(data, dict):
            raise ParseError("expected a mapping", lines.get(path), path or "<root>")
        self.data = data
        self.path = path
        self.lines = lines
        self.used = set()

    def _field(self, key):
        return f"{self.path}.{key}" if self.path else key

    def fail(self, key, message):
        f = self._field(key)
        raise ParseError(message, self.lines.get(f, self.lines.get(self.path)), f)

    def get(self, key, conv, default=None):
        self.used.add(key)
        if key not in self.data or self.data[key] is None:
            return default
        try:
            return conv(self.data[key])
        except (TypeError, ValueError) as exc:
            self.fail(key, f"bad value {self.data[key]!r} ({exc})")

    def sub(self, key):
        self.used.add(key)
        return _Reader(self.data.get(key) or {}, self._field(key), self.lines)

    def finish(self):
        extra = sorted(set(self.data) - self.used, key=str)
        if extra:
            self.fail(str(extra[0]), "unknown key")


def _as_float(x):
    if isinstance(x, bool):
        raise TypeError("expected a number")
    return float(x)


def _as_int(x):
    if isinstance(x, bool) or (isinstance(x, float) and not x.is_integer()):
        raise TypeError("expected an integer")
    return int(x)


def _as_bool(x):
    if not isinstance(x, bool):
        raise TypeError("expected true or false")
    return x


def _as_vec(x):
    if not isinstance(x, (list, tuple)) or len(x) != 2:
        raise TypeError("expected a 2-element list")
    return tuple(_as_float(c) for c in x)


def _section(name, build):
    try:
        return build()
    except (ValidationError, ParseError):
        raise
    except ValueError as exc:
        raise ValidationError(name, str(exc)) from None


def scenario_from_dict(data, lines=None) -> ScenarioConfig:
    """Build and validate a scenario from a parsed config mapping.

    ``lines`` maps dotted field paths to 1-based source lines for error
    messages. Missing keys take the ``SimConfig`` defaults.
    """
    lines = lines or {}
    root = _Reader(data, "", lines)
    d = SimConfig()

    name = root.get("name", str, "custom")
    kind = root.get("kind", str, "custom")
    if kind not in KINDS:
        root.fail("kind", f"must be one of {', '.join(KINDS)}")

    dyn = root.sub("dynamics")
    dynamics = _section("dynamics", lambda: DynamicsModel(
        dyn.get("kind", str, d.dynamics.kind.value), dyn.get("dt", _as_float, d.dynamics.dt)))
    dyn.finish()

    cb = root.sub("cbf")
    cbf = _section("cbf", lambda: CbfParams(
        gamma=cb.get("gamma", _as_float, d.cbf.gamma),
        r_safe=cb.get("r_safe", _as_float, d.cbf.r_safe),
        gamma2=cb.get("gamma2", _as_float, d.cbf.gamma2),
    ))
    cb.finish()

    ct = root.sub("controller")
    dc = d.controller
    controller = _section("controller", lambda: NominalController(
        kind=ct.get("kind", str, dc.kind.value),
        gain_k=ct.get("gain_k", _as_float, dc.gain_k),
        lane_axis=ct.get("lane_axis", _as_vec, dc.lane_axis),
        lane_point=ct.get("lane_point", _as_vec, dc.lane_point),
        lateral_gain=ct.get("lateral_gain", _as_float, dc.lateral_gain),
        v_max=ct.get("v_max", _as_float, dc.v_max),
        velocity_gain=ct.get("velocity_gain", _as_float, dc.velocity_gain),
    ))
    ct.finish()

    hr = root.sub("heuristic")
    dh = d.heuristic
    heuristic = _section("heuristic", lambda: DeadlockHeuristic(
        enabled=hr.get("enabled", _as_bool, dh.enabled),
        rotation_angle=hr.get("rotation_angle", _as_float, dh.rotation_angle),
        trigger_progress_eps=hr.get("trigger_progress_eps", _as_float, dh.trigger_progress_eps),
        trigger_window=hr.get("trigger_window", _as_int, dh.trigger_window),
        activation_h=hr.get("activation_h", _as_float, dh.activation_h),
    ))
    hr.finish()

    u_min = root.get("u_min", _as_vec, d.u_min)
    u_max = root.get("u_max", _as_vec, d.u_max)
    for k in range(2):
        if u_min[k] > u_max[k]:
            raise ValidationError("u_min", f"u_min {list(u_min)} exceeds u_max {list(u_max)}")

    sim = _section("run", lambda: SimConfig(
        dynamics=dynamics,
        cbf=cbf,
        u_min=u_min,
        u_max=u_max,
        controller=controller,
        heuristic=heuristic,
        max_steps=root.get("max_steps", _as_int, d.max_steps),
        goal_tolerance=root.get("goal_tolerance", _as_float, d.goal_tolerance),
        seed=root.get("seed", _as_int, d.seed),
        symmetric=root.get("symmetric", _as_bool, d.symmetric),
        relax=root.get("relax", _as_bool, d.relax),
        slack_penalty=root.get("slack_penalty", _as_float, d.slack_penalty),
        neighbor_radius=root.get("neighbor_radius", _as_float, d.neighbor_radius),
    ))
    if sim.slack_penalty <= 0:
        raise ValidationError("slack_penalty", "must be positive")

    merge_point = root.get("merge_point", _as_vec)
    output_dir = root.get("output_dir", str)

    root.used.add("agents")
    raw_agents = data.get("agents")
    if not isinstance(raw_agents, list) or not raw_agents:
        raise ValidationError("agents", "need a non-empty list of agents")
    agents = []
    for k, item in enumerate(raw_agents):
        ar = _Reader(item, f"agents[{k}]", lines)
        aid = ar.get("id", lambda v: v if isinstance(v, (int, str)) and not isinstance(v, bool) else _as_int(v), k + 1)
        x = ar.get("x", _as_vec)
        goal = ar.get("goal", _as_vec)
        if x is None:
            raise ValidationError(f"agents[{k}].x", "missing start position")
        if goal is None:
            raise ValidationError(f"agents[{k}].goal", "missing goal position")
        v = ar.get("v", _as_vec, (0.0, 0.0))
        theta = ar.get("theta", _as_float, 1.0)
        if not theta >= 0 or not math.isfinite(theta):
            raise ValidationError(f"agents[{k}].theta", f"must be a non-negative finite number, got {theta}")
        ar.finish()
        agents.append(AgentState(aid, x, v=v, theta=theta, goal=goal))
    root.finish()

    ids = [a.id for a in agents]
    if len(set(ids)) != len(ids):
        raise ValidationError("agents", f"duplicate agent ids in {ids}")
    r = sim.cbf.r_safe
    for a in range(len(agents)):
        for b in range(a + 1, len(agents)):
            dist = float(np.linalg.norm(agents[a].x - agents[b].x))
            if dist < r:
                raise ValidationError(
                    "agents", f"agents {agents[a].id} and {agents[b].id} start {dist:.6g} m apart, inside r_safe={r}")
    return ScenarioConfig(name, kind, sim, agents, merge_point, output_dir)


# ------------------------------------------------------------------ YAML

def _line_map(node, path="", out=None):
    """Dotted field path -> 1-based line for every node of a composed YAML tree."""
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key, val in node.value:
            sub = f"{path}.{key.value}" if path else str(key.value)
            out[sub] = key.start_mark.line + 1
            _line_map(val, sub, out)
            out[sub] = key.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for k, val in enumerate(node.value):
            _line_map(val, f"{path}[{k}]", out)
    return out


def parse_scenario(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark is not None else None
        raise ParseError(str(exc.problem or exc), line) from None
    except yaml.YAMLError as exc:
        raise ParseError(str(exc)) from None
    if data is None:
        raise ParseError("empty scenario file")
    return scenario_from_dict(data, _line_map(node))


def dump_scenario(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(scenario_to_dict(cfg), sort_keys=False, default_flow_style=None)


def write_scenario(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(dump_scenario(cfg), encoding="utf-8")


def load_scenario(path_or_name) -> ScenarioConfig:
    """Load a preset by name or a YAML scenario file."""
    if str(path_or_name) in PRESETS:
        return preset(str(path_or_name))
    p = Path(path_or_name)
    if not p.is_file():
        raise ValidationError("scenario", f"{path_or_name!r} is neither a preset nor a readable file")
    return parse_scenario(p.read_text(encoding="utf-8"))


# ----------------------------------------------------------------- sweeps

def draw_thetas(n: int, seed: int, low: float, high: float) -> np.ndarray:
    """Uniform scores in ``[low, high]`` with no two closer than 1e-9.

    Uses a PCG64 generator seeded with ``seed``; rejected draws are
    replaced by drawing the whole vector again.
    """
    if not low < high:
        raise ValueError(f"need low < high, got [{low}, {high}]")
    rng = np.random.Generator(np.random.PCG64(seed))
    while True:
        th = rng.uniform(low, high, n)
        gaps = np.abs(th[:, None] - th[None, :])
        np.fill_diagonal(gaps, np.inf)
        if n < 2 or gaps.min() > 1e-9:
            return th


def run_scenario(cfg: ScenarioConfig, symmetric: Optional[bool] = None):
    """Run one scenario; returns ``(log, metrics)``."""
    sim = cfg.sim if symmetric is None else dataclasses.replace(cfg.sim, symmetric=symmetric)
    log_ = run(sim, cfg.agents)
    return log_, compute_metrics(log_, sim.cbf.r_safe)


def _pad(series_list):
    """Stack series of unequal length, holding each one at its last value."""
    longest = max(len(s) for s in series_list)
    return np.array([np.concatenate([s, np.full(longest - len(s), s[-1])]) for s in series_list])


@dataclass
class RunSummary:
    seeds: list
    thetas: list
    metrics: dict = field(default_factory=dict)
    avg_min_distance: dict = field(default_factory=dict)
    mean_completion_step: dict = field(default_factory=dict)
    mean_deadlock_steps: dict = field(default_factory=dict)
    incomplete_runs: dict = field(default_factory=dict)
    improvement_pct: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "seeds": list(self.seeds),
            "thetas": [[float(t) for t in th] for th in self.thetas],
            "avg_min_distance": {m: [float(d) for d in s] for m, s in self.avg_min_distance.items()},
            "mean_completion_step": self.mean_completion_step,
            "mean_deadlock_steps": self.mean_deadlock_steps,
            "incomplete_runs": self.incomplete_runs,
            "improvement_pct": self.improvement_pct,
            "runs": {m: [r.to_dict() for r in rs] for m, rs in self.metrics.items()},
        }


def _improvement(sym, asym):
    if sym is None or asym is None or sym == 0:
        return None
    return 100.0 * (sym - asym) / sym


def summarize(seeds, thetas, metrics: dict, n_steps: dict) -> RunSummary:
    """Aggregate per-run metrics of both modes into a ``RunSummary``.

    Runs that never complete count with their full simulated length, so
    the mean completion is a lower bound for that mode.
    """
    out = RunSummary(list(seeds), [list(t) for t in thetas], metrics)
    for mode, runs in metrics.items():
        out.avg_min_distance[mode] = _pad([m.min_distance_series for m in runs]).mean(axis=0)
        comp = [m.completion_step if m.completion_step is not None else n_steps[mode][k]
                for k, m in enumerate(runs)]
        out.mean_completion_step[mode] = float(np.mean(comp))
        out.mean_deadlock_steps[mode] = float(np.mean([m.deadlock_duration_steps or 0 for m in runs]))
        out.incomplete_runs[mode] = sum(m.completion_step is None for m in runs)
    if set(MODES) <= set(metrics):
        out.improvement_pct = {
            "completion": _improvement(out.mean_completion_step["symmetric"], out.mean_completion_step["asymmetric"]),
            "deadlock": _improvement(out.mean_deadlock_steps["symmetric"], out.mean_deadlock_steps["asymmetric"]),
        }
    return out


def run_sweep(base: ScenarioConfig, n_seeds: int, theta_range, out_dir=None, base_seed=None) -> RunSummary:
    """Run both modes on ``n_seeds`` random score draws.

    Draw ``k`` uses seed ``base_seed + k`` (``base_seed`` defaults to the
    scenario's seed). With ``out_dir`` every run is written to
    ``out_dir/seed_<s>/<mode>/`` and the aggregate to ``sweep_summary.json``.
    """
    from .outputs import write_json, write_outputs

    if n_seeds < 1:
        raise ValueError("n_seeds must be at least 1")
    low, high = theta_range
    base_seed = base.sim.seed if base_seed is None else base_seed
    seeds = [base_seed + k for k in range(n_seeds)]
    thetas, metrics, n_steps = [], {m: [] for m in MODES}, {m: [] for m in MODES}
    for s in seeds:
        th = draw_thetas(len(base.agents), s, low, high)
        thetas.append(th)
        cfg = base.with_thetas(th).with_sim(seed=s)
        for mode in MODES:
            try:
                log_, m = run_scenario(cfg, symmetric=(mode == "symmetric"))
            except RsvoError as exc:
                exc.args = (f"seed {s}, {mode}: {exc}",)
                raise
            log.info("seed %d %s: completion=%s deadlock=%s", s, mode, m.completion_step, m.deadlock_duration_steps)
            metrics[mode].append(m)
            n_steps[mode].append(log_.n_steps)
            if out_dir is not None:
                write_outputs(log_, m, Path(out_dir) / f"seed_{s}" / mode, dataclasses.replace(
                    cfg, sim=dataclasses.replace(cfg.sim, symmetric=(mode == "symmetric"))))
    summary = summarize(seeds, thetas, metrics, n_steps)
    if out_dir is not None:
        write_json(summary.to_dict(), Path(out_dir) / "sweep_summary.json")
    return summary
