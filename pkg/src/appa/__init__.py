"""Adaptive Plant Propagation Algorithm with an economic load dispatch model."""

from .dispatch import (
    DispatchProblem,
    DispatchSolution,
    GeneratorUnit,
    PenaltyConfig,
    balance_residual,
    load_problem,
    penalized_objective,
    total_cost,
    validate_solution,
)
from .engine import AppaParams, Plant, RunTrace, SearchSpace, run
from .oracle import OracleSolution, brute_force_check, solve_lambda

__version__ = "0.1.0"
