"""Decentralized multi-agent safe control with responsibility-weighted barrier constraints."""
from .behaviors import DeadlockHeuristic, NominalController, apply_deadlock_heuristic, detect_deadlock, nominal_control
from .cbf import CbfParams, SafetyConstraint, SafetyFunction, first_order_constraint, safety_value, second_order_constraint
from .dynamics import AgentState, DynamicsKind, DynamicsModel, step, step_double, step_single
from .errors import (DegeneratePair, InfeasibleError, IoError, OutOfRange, ParseError, RsvoError,
                     UnsafeStart, ValidationError)
from .qp import QpProblem, QpSolution, QpStatus, solve, solve_relaxed
from .scenarios import ScenarioConfig, RunSummary, load_scenario, run_scenario, run_sweep
from .sim import Metrics, SimConfig, TrajectoryLog, compute_metrics, run
from .svo import compute_rsvo, compute_weight
from .outputs import write_outputs

__version__ = "0.1.0"
