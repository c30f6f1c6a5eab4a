"""Pairwise safety functions and responsibility-weighted barrier constraints.

The pairwise safety function is ``h = ||x_i - x_j||^2 - r_safe^2``. Each
agent only constrains its own control: the row ``a_row @ u_i <= b_rhs``
carries the fraction ``omega_i`` of the pair's class-K bound, so the two
rows of a pair with ``omega_i + omega_j = 1`` add up to the joint
(centralized) barrier condition.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class CbfParams:
    gamma: float = 1.0
    r_safe: float = 1.0
    # second slope of the exponential barrier, double-integrator agents only
    gamma2: float = 1.0

    def __post_init__(self):
        if self.gamma < 0 or self.gamma2 < 0:
            raise ValueError("gamma and gamma2 must be non-negative")
        if self.r_safe <= 0:
            raise ValueError("r_safe must be positive")


@dataclass(frozen=True)
class SafetyFunction:
    h_value: float
    grad_i: np.ndarray
    grad_j: np.ndarray


@dataclass(frozen=True)
class SafetyConstraint:
    """One half-plane ``a_row @ u <= b_rhs`` over an agent's own control."""

    a_row: np.ndarray
    b_rhs: float
    pair_id: tuple = field(default=(None, None))


def safety_value(x_i, x_j, r_safe: float) -> SafetyFunction:
    """Evaluate ``h`` and its gradients. Negative ``h`` (unsafe) is allowed."""
    r = np.asarray(x_i, dtype=float) - np.asarray(x_j, dtype=float)
    h = float(r @ r) - r_safe * r_safe
    return SafetyFunction(h, 2.0 * r, -2.0 * r)


def first_order_constraint(x_i, x_j, omega_i: float, params: CbfParams, pair_id=(None, None)) -> SafetyConstraint:
    """Velocity-level row for single-integrator agents.

    ``-2 (x_i - x_j) @ u_i <= omega_i * gamma * h``
    """
    r = np.asarray(x_i, dtype=float) - np.asarray(x_j, dtype=float)
    h = float(r @ r) - params.r_safe**2
    return SafetyConstraint(-2.0 * r, omega_i * params.gamma * h, pair_id)


def second_order_constraint(x_i, x_j, v_i, v_j, omega_i: float, params: CbfParams, pair_id=(None, None)) -> SafetyConstraint:
    """Acceleration-level row for double-integrator agents.

    Enforces ``h'' + (gamma + gamma2) h' + gamma * gamma2 * h >= 0``. With
    ``h'' = 2||v_i - v_j||^2 + 2 r @ (u_i - u_j)`` every term that does not
    involve ``u_i`` moves to the right-hand side and is scaled by
    ``omega_i``, including the velocity term, so the mirrored row of agent
    ``j`` completes the joint condition.
    """
    r = np.asarray(x_i, dtype=float) - np.asarray(x_j, dtype=float)
    dv = np.asarray(v_i, dtype=float) - np.asarray(v_j, dtype=float)
    h = float(r @ r) - params.r_safe**2
    h_dot = 2.0 * float(r @ dv)
    g, g2 = params.gamma, params.gamma2
    rhs = (g + g2) * h_dot + g * g2 * h + 2.0 * float(dv @ dv)
    return SafetyConstraint(-2.0 * r, omega_i * rhs, pair_id)


def centralized_constraint(x_i, x_j, params: CbfParams, v_i=None, v_j=None):
    """Joint row over the stacked control ``[u_i, u_j]``.

    Returns ``(a_joint, b)`` with ``a_joint`` of length 4. First order when
    velocities are omitted, second order otherwise.
    """
    r = np.asarray(x_i, dtype=float) - np.asarray(x_j, dtype=float)
    h = float(r @ r) - params.r_safe**2
    if v_i is None:
        b = params.gamma * h
    else:
        dv = np.asarray(v_i, dtype=float) - np.asarray(v_j, dtype=float)
        g, g2 = params.gamma, params.gamma2
        b = (g + g2) * 2.0 * float(r @ dv) + g * g2 * h + 2.0 * float(dv @ dv)
    return np.concatenate([-2.0 * r, 2.0 * r]), b
