"""Problem and result containers for the mixed binary LP solver."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LE, GE, EQ = "<=", ">=", "="
SENSES = (LE, GE, EQ)


class SolverError(RuntimeError):
    """Raised when the simplex cannot recover a usable basis."""


@dataclass
class MilpProblem:
    """``min c @ x`` subject to sparse linear rows, bounds and binary flags.

    Each constraint is ``({index: coefficient}, sense, rhs)``.
    """

    objective: np.ndarray
    var_lower: np.ndarray
    var_upper: np.ndarray
    is_binary: np.ndarray
    constraints: list = field(default_factory=list)
    var_names: list | None = None
    objective_offset: float = 0.0

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        k = len(self.objective)
        if k < 1:
            raise ValueError("problem needs at least one variable")
        self.var_lower = np.broadcast_to(np.asarray(self.var_lower, dtype=float), (k,)).copy()
        self.var_upper = np.broadcast_to(np.asarray(self.var_upper, dtype=float), (k,)).copy()
        self.is_binary = np.broadcast_to(np.asarray(self.is_binary, dtype=bool), (k,)).copy()
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective coefficients must be finite")
        if np.any(self.var_lower > self.var_upper):
            raise ValueError("variable lower bound exceeds upper bound")
        b = self.is_binary
        if np.any(self.var_lower[b] < 0) or np.any(self.var_upper[b] > 1):
            raise ValueError("binary variables must have bounds within [0, 1]")
        for row, sense, rhs in self.constraints:
            self._check_row(row, sense, rhs)

    def _check_row(self, row, sense, rhs):
        if sense not in SENSES:
            raise ValueError(f"unknown constraint sense {sense!r}")
        if not np.isfinite(rhs):
            raise ValueError("constraint rhs must be finite")
        for j, a in row.items():
            if not 0 <= j < self.num_vars:
                raise ValueError(f"constraint references variable {j}")
            if not np.isfinite(a):
                raise ValueError("constraint coefficients must be finite")

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def add_constraint(self, row: dict, sense: str, rhs: float) -> None:
        row = {int(j): float(a) for j, a in row.items() if a != 0.0}
        self._check_row(row, sense, rhs)
        self.constraints.append((row, sense, float(rhs)))

    def names(self) -> list[str]:
        return self.var_names or [f"x{j}" for j in range(self.num_vars)]

    def dense(self) -> tuple[np.ndarray, np.ndarray, list[str]]:
        """Constraint matrix, rhs vector and senses."""
        A = np.zeros((self.num_constraints, self.num_vars))
        rhs = np.empty(self.num_constraints)
        senses = []
        for i, (row, sense, b) in enumerate(self.constraints):
            for j, a in row.items():
                A[i, j] += a
            rhs[i] = b
            senses.append(sense)
        return A, rhs, senses

    def evaluate(self, x) -> float:
        return float(self.objective @ np.asarray(x, dtype=float)) + self.objective_offset

    def max_violation(self, x, integrality: bool = True) -> float:
        """Largest violation of rows, bounds and (optionally) integrality."""
        x = np.asarray(x, dtype=float)
        viol = 0.0
        viol = max(viol, float(np.max(self.var_lower - x, initial=0.0)))
        viol = max(viol, float(np.max(x - self.var_upper, initial=0.0)))
        for row, sense, b in self.constraints:
            lhs = sum(a * x[j] for j, a in row.items())
            if sense == LE:
                viol = max(viol, lhs - b)
            elif sense == GE:
                viol = max(viol, b - lhs)
            else:
                viol = max(viol, abs(lhs - b))
        if integrality and self.is_binary.any():
            xb = x[self.is_binary]
            viol = max(viol, float(np.max(np.abs(xb - np.round(xb)))))
        return viol


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    values: np.ndarray | None
    objective: float
    iterations: int = 0
    basis: object = None


@dataclass
class MilpLimits:
    time_limit: float = float("inf")
    node_limit: int | None = None
    gap_tol: float = 0.0

    def __post_init__(self):
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")
        if self.node_limit is not None and self.node_limit < 1:
            raise ValueError("node_limit must be positive")
        if self.gap_tol < 0:
            raise ValueError("gap_tol must be nonnegative")


@dataclass
class MilpResult:
    status: str  # optimal | feasible_limit_hit | infeasible | unbounded
    incumbent: np.ndarray | None
    incumbent_objective: float
    best_bound: float
    relative_gap: float
    nodes_explored: int
    elapsed: float
    lp_iterations: int = 0

    def summary(self) -> dict:
        return {
            "status": self.status,
            "objective": _json_float(self.incumbent_objective),
            "best_bound": _json_float(self.best_bound),
            "gap": _json_float(self.relative_gap),
            "nodes": self.nodes_explored,
            "time": round(self.elapsed, 6),
        }


def _json_float(v: float):
    return float(v) if np.isfinite(v) else str(v)
