"""Nominal task controllers and the right-hand deadlock heuristic.

The heuristic only ever rotates the nominal control handed to the safety
QP; the barrier rows are never touched, so safety does not depend on it.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import AgentState, DynamicsKind


class ControllerKind(str, enum.Enum):
    MOVE_TO_GOAL = "move_to_goal"
    LANE_FOLLOW = "lane_follow"


@dataclass(frozen=True)
class NominalController:
    """Proportional goal-seeking law ``u = -k (x - goal)``.

    ``v_max`` caps the norm of the commanded velocity. For double-integrator
    agents the commanded velocity is tracked with ``velocity_gain``:
    ``a = velocity_gain * (v_des - v)``. ``LANE_FOLLOW`` splits the error
    into a longitudinal part along ``lane_axis`` (gain ``gain_k``) and a
    lateral offset from the lane centerline through ``lane_point`` (gain
    ``lateral_gain``, defaults to ``gain_k``; ``lane_point`` defaults to
    the goal).
    """

    kind: ControllerKind = ControllerKind.MOVE_TO_GOAL
    gain_k: float = 0.5
    lane_axis: tuple = (0.0, 1.0)
    lane_point: Optional[tuple] = None
    lateral_gain: Optional[float] = None
    v_max: Optional[float] = None
    velocity_gain: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ControllerKind(self.kind))
        if self.gain_k <= 0:
            raise ValueError(f"gain_k must be positive, got {self.gain_k}")
        norm = math.hypot(*self.lane_axis)
        if norm == 0:
            raise ValueError("lane_axis must be non-zero")
        object.__setattr__(self, "lane_axis", (self.lane_axis[0] / norm, self.lane_axis[1] / norm))


def desired_velocity(state: AgentState, ctrl: NominalController) -> np.ndarray:
    err = state.x - state.goal
    if ctrl.kind is ControllerKind.MOVE_TO_GOAL:
        v = -ctrl.gain_k * err
    else:
        axis = np.array(ctrl.lane_axis)
        anchor = state.goal if ctrl.lane_point is None else np.asarray(ctrl.lane_point, dtype=float)
        off = state.x - anchor
        lateral = off - (off @ axis) * axis
        k_lat = ctrl.gain_k if ctrl.lateral_gain is None else ctrl.lateral_gain
        v = -ctrl.gain_k * (err @ axis) * axis - k_lat * lateral
    if ctrl.v_max is not None:
        speed = math.hypot(v[0], v[1])
        if speed > ctrl.v_max:
            v = v * (ctrl.v_max / speed)
    return v


def nominal_control(state: AgentState, ctrl: NominalController, kind=DynamicsKind.SINGLE) -> np.ndarray:
    """Task control: a velocity for single integrators, an acceleration otherwise."""
    v_des = desired_velocity(state, ctrl)
    if DynamicsKind(kind) is DynamicsKind.SINGLE:
        return v_des
    return ctrl.velocity_gain * (v_des - state.v)


@dataclass(frozen=True)
class DeadlockHeuristic:
    """Parameters of stall detection and the clockwise nominal rotation.

    ``trigger_progress_eps`` of None resolves per agent to
    ``0.05 * k * |x0 - goal|``. ``activation_h`` of None resolves to
    ``3 * r_safe**2``, i.e. the nearest neighbour is closer than
    ``2 * r_safe``.
    """

    enabled: bool = True
    rotation_angle: float = 0.2 * math.pi
    trigger_progress_eps: Optional[float] = None
    trigger_window: int = 50
    activation_h: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.rotation_angle < math.pi / 2:
            raise ValueError("rotation_angle must lie in (0, pi/2)")
        if self.trigger_window < 2:
            raise ValueError("trigger_window must be at least 2")


def rotate_clockwise(u, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * u[0] + s * u[1], -s * u[0] + c * u[1]])


def apply_deadlock_heuristic(u_nominal, state: AgentState, neighbors, heur: DeadlockHeuristic, deadlocked: bool) -> np.ndarray:
    """Rotate the nominal control clockwise while the agent is flagged as stalled.

    ``state`` and ``neighbors`` are accepted for interface symmetry with
    other local rules; the rotation itself needs neither.
    """
    if not (heur.enabled and deadlocked):
        return u_nominal
    return rotate_clockwise(u_nominal, heur.rotation_angle)


def detect_deadlock(
    history,
    goal,
    heur: DeadlockHeuristic,
    *,
    dt: float,
    progress_eps: float,
    h_min: float,
    h_activation: float,
    goal_tolerance: float,
) -> bool:
    """Stall test over the last ``trigger_window`` positions of one agent.

    True iff the agent is away from its goal, its mean speed over the
    window is below ``progress_eps`` and its nearest pairwise safety value
    is inside the activation band (``h_min < h_activation``).
    """
    w = heur.trigger_window
    if len(history) < w:
        return False
    recent = np.asarray(list(history)[-w:], dtype=float)
    if np.linalg.norm(recent[-1] - np.asarray(goal, dtype=float)) <= goal_tolerance:
        return False
    path = float(np.sum(np.linalg.norm(np.diff(recent, axis=0), axis=1)))
    mean_speed = path / ((w - 1) * dt)
    return mean_speed < progress_eps and h_min < h_activation
