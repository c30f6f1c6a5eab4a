"""Minimum-deviation QP over a single agent's 2-D control.

    minimize    ||u - u_nominal||^2
    subject to  u_min <= u <= u_max
                a_k @ u <= b_k          for every stacked barrier row

The problem is tiny (two variables, a handful of rows), so instead of a
general-purpose solver the optimum is found by active-set enumeration: with
a strictly convex objective the minimizer is either the nominal point, the
projection onto a single constraint line, or the intersection of two
constraint lines. All candidates are built at once, filtered for
feasibility and the closest feasible one wins. Ties keep the candidate with
the lowest constraint indices, so results are deterministic.

Constraint indexing used by ``QpSolution.active_set``: the barrier rows come
first in their given order, followed by the four box rows
``u0 <= max0, u1 <= max1, -u0 <= -min0, -u1 <= -min1``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

FEAS_TOL = 1e-9
_ZERO_ROW = 1e-14


class QpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    RELAXED_FEASIBLE = "RelaxedFeasible"


@dataclass
class QpProblem:
    u_nominal: np.ndarray
    u_min: np.ndarray
    u_max: np.ndarray
    rows: list = field(default_factory=list)

    def __post_init__(self):
        self.u_nominal = np.asarray(self.u_nominal, dtype=float)
        self.u_min = np.asarray(self.u_min, dtype=float)
        self.u_max = np.asarray(self.u_max, dtype=float)
        if np.any(self.u_min > self.u_max):
            raise ValueError(f"u_min {self.u_min} exceeds u_max {self.u_max}")

    def matrices(self):
        """All constraints as ``(G, h)`` with ``G @ u <= h``, box rows last."""
        m = len(self.rows)
        G = np.empty((m + 4, 2))
        h = np.empty(m + 4)
        for k, row in enumerate(self.rows):
            G[k] = row.a_row
            h[k] = row.b_rhs
        G[m:] = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]
        h[m:] = np.concatenate([self.u_max, -self.u_min])
        return G, h


@dataclass
class QpSolution:
    u_star: np.ndarray
    status: QpStatus
    active_set: tuple = ()
    slack_used: float = 0.0


def _normalize(G, h):
    """Scale rows to unit normals and drop vacuous zero rows.

    Returns ``(G, h, infeasible)``; a zero row with negative right-hand side
    makes the problem infeasible.
    """
    norms = np.hypot(G[:, 0], G[:, 1])
    zero = norms < _ZERO_ROW
    if np.any(zero & (h < -FEAS_TOL)):
        return None, None, True
    keep = ~zero
    n = norms[keep]
    return G[keep] / n[:, None], h[keep] / n, False


def _project_2d(z0, G, h):
    """Closest point to ``z0`` in ``{z : G z <= h}`` for unit-normal rows.

    Returns None when no candidate is feasible (empty polytope).
    """
    m = len(h)
    resid = G @ z0 - h
    if np.all(resid <= FEAS_TOL):
        return z0.copy()

    singles = z0 - resid[:, None] * G
    I, J = np.triu_indices(m, k=1)
    det = G[I, 0] * G[J, 1] - G[I, 1] * G[J, 0]
    ok = np.abs(det) > 1e-12
    I, J, det = I[ok], J[ok], det[ok]
    px = (h[I] * G[J, 1] - h[J] * G[I, 1]) / det
    py = (G[I, 0] * h[J] - G[J, 0] * h[I]) / det
    pairs = np.column_stack([px, py])

    cand = np.vstack([singles, pairs])
    feasible = np.all(cand @ G.T - h <= FEAS_TOL, axis=1)
    if not np.any(feasible):
        return None
    d2 = np.sum((cand - z0) ** 2, axis=1)
    d2[~feasible] = np.inf
    return cand[int(np.argmin(d2))]


def _active(G, h, u, tol=FEAS_TOL):
    norms = np.hypot(G[:, 0], G[:, 1])
    scale = np.where(norms < _ZERO_ROW, 1.0, norms)
    return tuple(int(k) for k in np.flatnonzero(np.abs(G @ u - h) <= tol * scale))


def solve(problem: QpProblem) -> QpSolution:
    """Euclidean projection of the nominal control onto the feasible polytope."""
    G, h = problem.matrices()
    Gn, hn, infeasible = _normalize(G, h)
    z0 = problem.u_nominal
    u = None if infeasible else _project_2d(z0, Gn, hn)
    if u is None:
        return QpSolution(np.clip(z0, problem.u_min, problem.u_max), QpStatus.INFEASIBLE)
    return QpSolution(u, QpStatus.OPTIMAL, _active(G, h, u))


def _min_slack(problem: QpProblem) -> float:
    """Smallest shared slack that makes the barrier rows and the box feasible."""
    G, h = problem.matrices()
    m = len(problem.rows)
    A = np.column_stack([G[:m], -np.ones(m)])
    bounds = [(lo, hi) for lo, hi in zip(problem.u_min, problem.u_max)] + [(None, None)]
    res = optimize.linprog([0.0, 0.0, 1.0], A_ub=A, b_ub=h[:m], bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"slack LP failed: {res.message}")
    return max(float(res.x[2]), 0.0)


def _project_with_slack(problem: QpProblem, s: float):
    G, h = problem.matrices()
    h = h.copy()
    h[: len(problem.rows)] += s
    Gn, hn, infeasible = _normalize(G, h)
    if infeasible:
        return None
    return _project_2d(problem.u_nominal, Gn, hn)


def solve_relaxed(problem: QpProblem, slack_penalty: float = 1e6) -> QpSolution:
    """Solve hard first; if the rows conflict, soften them with one shared slack.

    The fallback minimizes ``||u - u_nominal||^2 + slack_penalty * s^2``
    subject to ``a_k @ u <= b_k + s``, ``s >= 0`` with the box kept hard.
    The optimal value is convex in ``s``, so it is found by a bounded scalar
    search between the smallest feasible slack and the slack at which the
    clipped nominal becomes feasible; the inner problem is the exact 2-D
    projection.
    """
    if slack_penalty <= 0:
        raise ValueError("slack_penalty must be positive")
    hard = solve(problem)
    if hard.status is QpStatus.OPTIMAL:
        return hard

    G, h = problem.matrices()
    m = len(problem.rows)
    if m == 0:
        return hard
    s_lo = _min_slack(problem)
    clipped = np.clip(problem.u_nominal, problem.u_min, problem.u_max)
    s_hi = max(s_lo, float(np.max(G[:m] @ clipped - h[:m])))

    def cost(s):
        u = _project_with_slack(problem, s)
        if u is None:
            return np.inf
        return float(np.sum((u - problem.u_nominal) ** 2)) + slack_penalty * s * s

    # a hair above s_lo keeps the inner polygon from collapsing to a point
    s_lo_safe = s_lo * (1 + 1e-12) + 1e-12
    if s_hi <= s_lo_safe:
        s = s_lo_safe
    else:
        res = optimize.minimize_scalar(cost, bounds=(s_lo_safe, s_hi), method="bounded",
                                       options={"xatol": 1e-12 * max(1.0, s_hi)})
        s = float(res.x)
        if cost(s_lo_safe) <= cost(s):
            s = s_lo_safe
    u = _project_with_slack(problem, s)
    if u is None:
        return QpSolution(clipped, QpStatus.INFEASIBLE)
    status = QpStatus.RELAXED_FEASIBLE if s > FEAS_TOL else QpStatus.OPTIMAL
    h_relaxed = h.copy()
    h_relaxed[:m] += s
    return QpSolution(u, status, _active(G, h_relaxed, u), s)
