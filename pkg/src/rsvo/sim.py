"""Decentralized responsibility-weighted safe control loop.

Every step each agent, using only the step-``t`` snapshot of positions (and
velocities), builds one barrier row per other agent weighted by its local
responsibility weight, computes its nominal control, optionally rotates it
when stalled, and projects it onto the safe set. All agents then move
simultaneously.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import qp
from .behaviors import (
    DeadlockHeuristic,
    NominalController,
    apply_deadlock_heuristic,
    detect_deadlock,
    nominal_control,
)
from .cbf import CbfParams, first_order_constraint, second_order_constraint
from .dynamics import AgentState, DynamicsKind, DynamicsModel, step
from .errors import InfeasibleError, UnsafeStart
from .svo import compute_rsvo, compute_weight

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    dynamics: DynamicsModel = field(default_factory=DynamicsModel)
    cbf: CbfParams = field(default_factory=CbfParams)
    u_min: tuple = (-1.0, -1.0)
    u_max: tuple = (1.0, 1.0)
    controller: NominalController = field(default_factory=NominalController)
    heuristic: DeadlockHeuristic = field(default_factory=DeadlockHeuristic)
    max_steps: int = 2000
    goal_tolerance: float = 0.05
    seed: int = 0
    # force omega = 0.5 on every pair (responsibility-agnostic baseline)
    symmetric: bool = False
    # False: hard QP, infeasibility raises
    relax: bool = True
    slack_penalty: float = 1e6
    # None: every other agent contributes a row
    neighbor_radius: Optional[float] = None

    def __post_init__(self):
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if self.goal_tolerance <= 0:
            raise ValueError("goal_tolerance must be positive")
        if any(lo > hi for lo, hi in zip(self.u_min, self.u_max)):
            raise ValueError("u_min must not exceed u_max")


@dataclass
class TrajectoryLog:
    """Per-step, per-agent record of one run. Arrays are indexed ``[step, agent, ...]``."""

    dt: float
    ids: list
    goals: np.ndarray
    thetas: np.ndarray
    x: np.ndarray
    v: np.ndarray
    u_task: np.ndarray
    u_nom: np.ndarray
    u: np.ndarray
    status: np.ndarray
    slack: np.ndarray
    h: np.ndarray
    omega: np.ndarray
    deadlocked: np.ndarray
    heuristic_active: np.ndarray
    completion_step: Optional[int] = None
    final_x: Optional[np.ndarray] = None

    @property
    def n_steps(self) -> int:
        return self.x.shape[0]

    @property
    def n_agents(self) -> int:
        return self.x.shape[1]

    @property
    def slack_events(self) -> int:
        return int(np.count_nonzero(self.status == qp.QpStatus.RELAXED_FEASIBLE.value))


@dataclass
class Metrics:
    min_distance_series: np.ndarray
    avg_min_distance: np.ndarray
    completion_step: Optional[int]
    completion_time_s: Optional[float]
    deadlock_start_step: Optional[int]
    deadlock_end_step: Optional[int]
    path_lengths: np.ndarray
    max_incursion: float = 0.0

    @property
    def deadlock_duration_steps(self) -> Optional[int]:
        if self.deadlock_start_step is None:
            return None
        return self.deadlock_end_step - self.deadlock_start_step

    def to_dict(self) -> dict:
        return {
            "min_distance_series": [float(d) for d in self.min_distance_series],
            "avg_min_distance": [float(d) for d in self.avg_min_distance],
            "completion_step": self.completion_step,
            "completion_time_s": self.completion_time_s,
            "deadlock_start_step": self.deadlock_start_step,
            "deadlock_end_step": self.deadlock_end_step,
            "path_lengths": [float(p) for p in self.path_lengths],
        }


def pair_weight(theta_i: float, theta_j: float, symmetric: bool = False) -> float:
    if symmetric:
        return 0.5
    return compute_weight(compute_rsvo(theta_i, theta_j))


def agent_constraints(i: int, x, v, thetas, config: SimConfig):
    """Stacked barrier rows of agent ``i`` from the state snapshot ``(x, v)``.

    Returns ``(rows, h, omega)``; ``h`` and ``omega`` hold one entry per
    agent with NaN at ``i`` and at culled neighbours.
    """
    n = len(x)
    rows = []
    h = np.full(n, np.nan)
    omega = np.full(n, np.nan)
    second = config.dynamics.kind is DynamicsKind.DOUBLE
    r2 = config.cbf.r_safe**2
    for j in range(n):
        if j == i:
            continue
        d = x[i] - x[j]
        h[j] = float(d @ d) - r2
        if config.neighbor_radius is not None and float(d @ d) > config.neighbor_radius**2:
            continue
        omega[j] = pair_weight(thetas[i], thetas[j], config.symmetric)
        if second:
            rows.append(second_order_constraint(x[i], x[j], v[i], v[j], omega[j], config.cbf, (i, j)))
        else:
            rows.append(first_order_constraint(x[i], x[j], omega[j], config.cbf, (i, j)))
    return rows, h, omega


def check_safe_start(agents, r_safe: float) -> None:
    for a in range(len(agents)):
        for b in range(a + 1, len(agents)):
            d = agents[a].x - agents[b].x
            if float(d @ d) - r_safe**2 < 0:
                raise UnsafeStart(
                    f"agents {agents[a].id} and {agents[b].id} start {np.sqrt(d @ d):.6g} m apart, "
                    f"inside r_safe={r_safe}"
                )


class StallMonitor:
    """Per-agent stall detection with hysteresis, fed one position per step.

    Holds each agent's recent positions. Once an agent is flagged the
    rotation stays engaged for ``trigger_window`` further steps.
    """

    def __init__(self, config: SimConfig, x0, goals):
        heur = config.heuristic
        self.heur = heur
        self.config = config
        self.goals = np.asarray(goals, dtype=float)
        n = len(self.goals)
        if heur.trigger_progress_eps is None:
            dist = np.linalg.norm(np.asarray(x0, dtype=float) - self.goals, axis=1)
            self.eps = 0.05 * config.controller.gain_k * dist
        else:
            self.eps = np.full(n, float(heur.trigger_progress_eps))
        r2 = config.cbf.r_safe**2
        self.h_activation = 3.0 * r2 if heur.activation_h is None else heur.activation_h
        self.history = [deque(maxlen=heur.trigger_window) for _ in range(n)]
        self.hold = [0] * n

    def update(self, i: int, x_i, h_min: float):
        """Record agent ``i``'s position; returns ``(flagged, rotation_active)``."""
        self.history[i].append(np.asarray(x_i, dtype=float))
        if not self.heur.enabled:
            return False, False
        flagged = detect_deadlock(
            self.history[i], self.goals[i], self.heur, dt=self.config.dynamics.dt,
            progress_eps=float(self.eps[i]), h_min=h_min, h_activation=self.h_activation,
            goal_tolerance=self.config.goal_tolerance,
        )
        self.hold[i] = self.heur.trigger_window if flagged else max(self.hold[i] - 1, 0)
        return flagged, flagged or self.hold[i] > 0


def stall_flags(config: SimConfig, x, goals):
    """Replay stall detection over a recorded ``(T, N, 2)`` position array."""
    x = np.asarray(x, dtype=float)
    T, n, _ = x.shape
    monitor = StallMonitor(config, x[0], goals)
    flagged = np.zeros((T, n), dtype=bool)
    active = np.zeros((T, n), dtype=bool)
    r2 = config.cbf.r_safe**2
    for t in range(T):
        for i in range(n):
            # same arithmetic as agent_constraints so replayed flags match bit for bit
            h_min = min((float((x[t, i] - x[t, j]) @ (x[t, i] - x[t, j])) - r2 for j in range(n) if j != i),
                        default=np.inf)
            flagged[t, i], active[t, i] = monitor.update(i, x[t, i], h_min)
    return flagged, active


def run(config: SimConfig, agents: list) -> TrajectoryLog:
    """Simulate until every agent is within ``goal_tolerance`` of its goal or ``max_steps``."""
    if not agents:
        raise ValueError("need at least one agent")
    check_safe_start(agents, config.cbf.r_safe)
    states = list(agents)
    n = len(states)
    dt = config.dynamics.dt
    heur = config.heuristic
    ctrl = config.controller
    kind = config.dynamics.kind
    thetas = np.array([s.theta for s in states], dtype=float)
    goals = np.array([s.goal for s in states])
    u_min = np.asarray(config.u_min, dtype=float)
    u_max = np.asarray(config.u_max, dtype=float)

    monitor = StallMonitor(config, np.array([s.x for s in states]), goals)

    rec = {k: [] for k in ("x", "v", "u_task", "u_nom", "u", "status", "slack", "h", "omega", "deadlocked", "active")}
    completion = None

    for t in range(config.max_steps):
        x = np.array([s.x for s in states])
        v = np.array([s.v for s in states])
        at_goal = np.linalg.norm(x - goals, axis=1) <= config.goal_tolerance
        H = np.full((n, n), np.nan)
        W = np.full((n, n), np.nan)
        U_task = np.zeros((n, 2))
        U_nom = np.zeros((n, 2))
        U = np.zeros((n, 2))
        status = []
        slack = np.zeros(n)
        flagged = np.zeros(n, dtype=bool)
        active = np.zeros(n, dtype=bool)

        for i in range(n):
            rows, H[i], W[i] = agent_constraints(i, x, v, thetas, config)
            flagged[i], active[i] = monitor.update(i, x[i], np.nanmin(H[i]) if n > 1 else np.inf)

            U_task[i] = nominal_control(states[i], ctrl, kind)
            U_nom[i] = apply_deadlock_heuristic(U_task[i], states[i], (), heur, bool(active[i]))
            problem = qp.QpProblem(U_nom[i], u_min, u_max, rows)
            if config.relax:
                sol = qp.solve_relaxed(problem, config.slack_penalty)
            else:
                sol = qp.solve(problem)
                if sol.status is qp.QpStatus.INFEASIBLE:
                    raise InfeasibleError(f"agent {states[i].id} has no safe control at step {t}")
            if sol.status is qp.QpStatus.RELAXED_FEASIBLE:
                log.warning("step %d agent %s: safety QP relaxed, slack=%.3g", t, states[i].id, sol.slack_used)
            U[i] = sol.u_star
            status.append(sol.status.value)
            slack[i] = sol.slack_used

        for key, val in (("x", x), ("v", v), ("u_task", U_task), ("u_nom", U_nom), ("u", U),
                         ("status", status), ("slack", slack), ("h", H), ("omega", W),
                         ("deadlocked", flagged), ("active", active)):
            rec[key].append(val)

        if np.all(at_goal):
            completion = t
            break
        states = [step(s, U[i], config.dynamics) for i, s in enumerate(states)]

    log.info("run finished after %d steps (completion=%s)", len(rec["x"]), completion)
    return TrajectoryLog(
        dt=dt,
        ids=[s.id for s in agents],
        goals=goals,
        thetas=thetas,
        x=np.array(rec["x"]),
        v=np.array(rec["v"]),
        u_task=np.array(rec["u_task"]),
        u_nom=np.array(rec["u_nom"]),
        u=np.array(rec["u"]),
        status=np.array(rec["status"], dtype=object),
        slack=np.array(rec["slack"]),
        h=np.array(rec["h"]),
        omega=np.array(rec["omega"]),
        deadlocked=np.array(rec["deadlocked"]),
        heuristic_active=np.array(rec["active"]),
        completion_step=completion,
        final_x=np.array([s.x for s in states]),
    )


def compute_metrics(log_: TrajectoryLog, r_safe: float) -> Metrics:
    if log_.n_steps == 0:
        raise ValueError("empty trajectory log")
    return metrics_from_arrays(log_.x, log_.deadlocked, log_.heuristic_active,
                               log_.completion_step, log_.dt, r_safe)


def metrics_from_arrays(x, deadlocked, active, completion_step, dt: float, r_safe: float) -> Metrics:
    """Metrics from positions ``(T, N, 2)`` and per-step stall flags ``(T, N)``.

    The deadlock window opens at the first flagged step and closes one step
    after the last step in which any agent still had its rotation engaged.
    """
    x = np.asarray(x, dtype=float)
    T, n, _ = x.shape
    if T == 0:
        raise ValueError("empty trajectory")
    if n > 1:
        d = np.linalg.norm(x[:, :, None, :] - x[:, None, :, :], axis=-1)
        d[:, np.arange(n), np.arange(n)] = np.inf
        per_agent = d.min(axis=2)
        min_series = per_agent.min(axis=1)
        avg_series = per_agent.mean(axis=1)
    else:
        min_series = avg_series = np.full(T, np.inf)

    flagged = np.flatnonzero(np.asarray(deadlocked).any(axis=1))
    if flagged.size:
        start = int(flagged[0])
        engaged = np.flatnonzero(np.asarray(active).any(axis=1))
        end = int(engaged[-1]) + 1
    else:
        start = end = None

    paths = np.linalg.norm(np.diff(x, axis=0), axis=2).sum(axis=0) if T > 1 else np.zeros(n)
    incursion = float(max(0.0, r_safe - np.min(min_series))) if n > 1 else 0.0
    return Metrics(
        min_distance_series=min_series,
        avg_min_distance=avg_series,
        completion_step=completion_step,
        completion_time_s=None if completion_step is None else completion_step * dt,
        deadlock_start_step=start,
        deadlock_end_step=end,
        path_lengths=paths,
        max_incursion=incursion,
    )
