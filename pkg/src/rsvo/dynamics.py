"""Fixed-step integration of planar single- and double-integrator agents."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np


class DynamicsKind(str, enum.Enum):
    SINGLE = "single_integrator"
    DOUBLE = "double_integrator"


@dataclass(frozen=True)
class DynamicsModel:
    kind: DynamicsKind = DynamicsKind.SINGLE
    dt: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "kind", DynamicsKind(self.kind))
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


@dataclass(frozen=True)
class AgentState:
    id: int
    x: np.ndarray
    v: np.ndarray = field(default_factory=lambda: np.zeros(2))
    theta: float = 1.0
    goal: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        for name in ("x", "v", "goal"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.theta < 0:
            raise ValueError(f"agent {self.id}: theta must be non-negative, got {self.theta}")


def step_single(state: AgentState, u, dt: float) -> AgentState:
    """Explicit Euler for ``x' = u``; the applied velocity is stored in ``v``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    u = np.asarray(u, dtype=float)
    return replace(state, x=state.x + u * dt, v=u.copy())


def step_double(state: AgentState, u, dt: float) -> AgentState:
    """Semi-implicit Euler for ``x' = v, v' = u`` (velocity updated first)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v = state.v + np.asarray(u, dtype=float) * dt
    return replace(state, x=state.x + v * dt, v=v)


def step(state: AgentState, u, model: DynamicsModel) -> AgentState:
    if model.kind is DynamicsKind.SINGLE:
        return step_single(state, u, model.dt)
    return step_double(state, u, model.dt)
