"""Responsibility-associated social value orientation and pairwise weights.

Each agent carries a global personality score ``theta >= 0`` (smaller means
more egoistic). For a pair ``(i, j)`` the relative orientation of ``i`` is

    phi_i = theta_i / (theta_i + theta_j) * pi / 2

and the share of the pairwise barrier bound agent ``i`` may consume is
``omega_i = cos(phi_i) ** 2``. Since ``phi_j = pi/2 - phi_i`` the two
shares of a pair always sum to one.
"""
from __future__ import annotations

import math

from .errors import DegeneratePair, OutOfRange

HALF_PI = math.pi / 2


def compute_rsvo(theta_i: float, theta_j: float) -> float:
    """Relative orientation angle of agent ``i`` against agent ``j``, in radians."""
    if theta_i < 0 or theta_j < 0:
        raise ValueError(f"personality scores must be non-negative, got {theta_i}, {theta_j}")
    total = theta_i + theta_j
    if total <= 0:
        raise DegeneratePair("theta_i + theta_j must be positive")
    return theta_i / total * HALF_PI


def compute_weight(phi: float) -> float:
    """Local pairwise responsibility weight ``cos(phi)**2``.

    Evaluated as ``(1 + cos(2 phi)) / 2`` so the equal-score angle pi/4
    gives exactly 0.5 and the end points give exactly 1 and 0.
    """
    if not 0.0 <= phi <= HALF_PI:
        raise OutOfRange(f"phi={phi!r} outside [0, pi/2]")
    return 0.5 * (1.0 + math.cos(2.0 * phi))


def theta_ratio_for_weight(omega: float) -> float:
    """Fraction ``theta_i / (theta_i + theta_j)`` that yields weight ``omega``."""
    if not 0.0 <= omega <= 1.0:
        raise OutOfRange(f"omega={omega!r} outside [0, 1]")
    return math.acos(math.sqrt(omega)) / HALF_PI
