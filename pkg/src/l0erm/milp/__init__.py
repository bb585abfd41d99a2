"""Exact solver for linear programs with binary variables."""

from .branch_bound import BranchAndBound, relative_gap, solve_milp
from .lpformat import read_lp, write_lp
from .model import EQ, GE, LE, LpSolution, MilpLimits, MilpProblem, MilpResult, SolverError
from .simplex import BoundedSimplex, solve_lp

__all__ = [
    "EQ",
    "GE",
    "LE",
    "BoundedSimplex",
    "BranchAndBound",
    "LpSolution",
    "MilpLimits",
    "MilpProblem",
    "MilpResult",
    "SolverError",
    "read_lp",
    "relative_gap",
    "solve_lp",
    "solve_milp",
    "write_lp",
]
