"""Branch and bound over binary variables on top of :mod:`simplex`."""

from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import EQ, GE, LE, MilpLimits, MilpProblem, MilpResult
from .simplex import BasisState, BoundedSimplex

log = logging.getLogger(__name__)

Heuristic = Callable[[np.ndarray], "np.ndarray | None"]


@dataclass
class _Node:
    bound: float
    depth: int
    lower: np.ndarray
    upper: np.ndarray
    warm: BasisState | None


def relative_gap(incumbent: float, bound: float) -> float:
    if not np.isfinite(incumbent):
        return np.inf
    diff = max(incumbent - bound, 0.0)
    if diff == 0.0:
        return 0.0
    if incumbent == 0.0:
        return np.inf
    return diff / abs(incumbent)


class BranchAndBound:
    """Most-fractional branching, best-bound search with an initial dive.

    ``heuristic`` receives every fractional node solution and may return a
    full candidate vector; candidates are only accepted after a feasibility
    check against the original problem.
    """

    def __init__(
        self,
        problem: MilpProblem,
        limits: MilpLimits | None = None,
        heuristic: Heuristic | None = None,
        int_tol: float = 1e-6,
        feas_tol: float = 1e-6,
        abs_tol: float = 1e-9,
    ):
        self.problem = problem
        self.limits = limits or MilpLimits()
        self.heuristic = heuristic
        self.int_tol = int_tol
        self.feas_tol = feas_tol
        self.abs_tol = abs_tol
        A, rhs, senses = problem.dense()
        self._A = A
        self._row_lo = np.array([b if s in (GE, EQ) else -np.inf for s, b in zip(senses, rhs)])
        self._row_hi = np.array([b if s in (LE, EQ) else np.inf for s, b in zip(senses, rhs)])
        self.lp = BoundedSimplex(problem.objective, A, senses, rhs)
        self._binary = np.flatnonzero(problem.is_binary)

        self.incumbent: np.ndarray | None = None
        self.incumbent_obj = np.inf
        self.nodes = 0
        self.lp_iterations = 0

    # -- incumbent handling ------------------------------------------------

    def violation(self, x) -> float:
        p = self.problem
        x = np.asarray(x, dtype=float)
        v = max(float(np.max(p.var_lower - x, initial=0.0)), float(np.max(x - p.var_upper, initial=0.0)))
        if len(self._A):
            ax = self._A @ x
            v = max(v, float(np.max(self._row_lo - ax, initial=0.0)), float(np.max(ax - self._row_hi, initial=0.0)))
        if len(self._binary):
            xb = x[self._binary]
            v = max(v, float(np.max(np.abs(xb - np.round(xb)))))
        return v

    def offer(self, x, source: str = "") -> bool:
        """Accept ``x`` as incumbent if feasible and strictly better."""
        if x is None:
            return False
        x = np.array(x, dtype=float)
        if len(self._binary):
            x[self._binary] = np.round(x[self._binary])
        if self.violation(x) > self.feas_tol:
            return False
        obj = self.problem.evaluate(x)
        if obj < self.incumbent_obj - self.abs_tol:
            self.incumbent = x
            self.incumbent_obj = obj
            log.debug("incumbent %.10g from %s at node %d", obj, source or "node", self.nodes)
            return True
        return False

    def _cutoff(self) -> float:
        if self.incumbent is None:
            return np.inf
        return self.incumbent_obj - max(self.abs_tol, self.limits.gap_tol * abs(self.incumbent_obj))

    # -- search ------------------------------------------------------------

    def _fix_and_resolve(self, x, lower, upper, warm):
        """Pin near-integral binaries and re-solve for the continuous part."""
        lo, hi = lower.copy(), upper.copy()
        b = self._binary
        lo[b] = hi[b] = np.round(x[b])
        sol = self.lp.solve(lo, hi, warm)
        self.lp_iterations += sol.iterations
        if sol.status != "optimal":
            return None
        return sol.values

    def solve(self, initial: np.ndarray | None = None) -> MilpResult:
        start = time.perf_counter()
        p = self.problem
        limits = self.limits
        if initial is not None:
            self.offer(initial, "initial")

        dive: list[_Node] = [_Node(-np.inf, 0, p.var_lower.copy(), p.var_upper.copy(), None)]
        heap: list = []
        seq = 0
        hit_limit = False
        root_unbounded = False

        def push(node: _Node):
            nonlocal seq
            seq += 1
            if self.incumbent is None:
                dive.append(node)
            else:
                heapq.heappush(heap, (node.bound, seq, node))

        while dive or heap:
            if limits.node_limit is not None and self.nodes >= limits.node_limit:
                hit_limit = True
                break
            if time.perf_counter() - start >= limits.time_limit:
                hit_limit = True
                break
            if self.incumbent is not None and dive:
                for node in dive:
                    seq += 1
                    heapq.heappush(heap, (node.bound, seq, node))
                dive.clear()
            node = dive.pop() if dive else heapq.heappop(heap)[2]
            if node.bound >= self._cutoff():
                continue

            sol = self.lp.solve(node.lower, node.upper, node.warm)
            self.nodes += 1
            self.lp_iterations += sol.iterations
            if sol.status == "infeasible":
                continue
            if sol.status == "unbounded":
                if node.depth == 0:
                    root_unbounded = True
                    break
                continue
            x = sol.values
            obj = sol.objective + p.objective_offset
            if obj >= self._cutoff():
                continue

            xb = x[self._binary]
            frac = np.abs(xb - np.round(xb))
            if not np.any(frac > self.int_tol):
                fixed = self._fix_and_resolve(x, node.lower, node.upper, sol.basis)
                if fixed is not None and self.offer(fixed, "lp"):
                    continue
                if fixed is not None and self.violation(fixed) <= self.feas_tol:
                    continue
                if not np.any(frac > 0):
                    continue
            else:
                if self.heuristic is not None:
                    self.offer(self.heuristic(x), "heuristic")
                rounded = x.copy()
                rounded[self._binary] = np.round(xb)
                self.offer(rounded, "rounding")
                if obj >= self._cutoff():
                    continue

            # most fractional, lowest index on ties
            dist = np.abs(frac - 0.5) if np.any(frac > self.int_tol) else -frac
            k = int(np.argmin(dist))
            j = int(self._binary[k])
            down_lo, down_hi = node.lower.copy(), node.upper.copy()
            down_hi[j] = 0.0
            up_lo, up_hi = node.lower.copy(), node.upper.copy()
            up_lo[j] = 1.0
            down = _Node(obj, node.depth + 1, down_lo, down_hi, sol.basis)
            up = _Node(obj, node.depth + 1, up_lo, up_hi, sol.basis)
            # the dive explores the rounding direction first
            if x[j] >= 0.5:
                push(down)
                push(up)
            else:
                push(up)
                push(down)

        elapsed = time.perf_counter() - start
        if root_unbounded:
            return MilpResult("unbounded", None, -np.inf, -np.inf, np.inf, self.nodes, elapsed, self.lp_iterations)
        open_bounds = [nd.bound for nd in dive] + [entry[0] for entry in heap]
        if hit_limit:
            bound = min(open_bounds + [self.incumbent_obj]) if open_bounds else self.incumbent_obj
            if not open_bounds and self.incumbent is None:
                bound = -np.inf
            if self.incumbent is None:
                bound = min(open_bounds) if open_bounds else -np.inf
            status = "feasible_limit_hit"
        else:
            bound = self.incumbent_obj
            status = "optimal" if self.incumbent is not None else "infeasible"
        if self.incumbent is not None:
            bound = min(bound, self.incumbent_obj)
        gap = relative_gap(self.incumbent_obj, bound)
        if hit_limit and self.incumbent is not None and gap <= limits.gap_tol and not open_bounds:
            status = "optimal"
        return MilpResult(
            status,
            None if self.incumbent is None else self.incumbent.copy(),
            self.incumbent_obj,
            bound,
            gap,
            self.nodes,
            elapsed,
            self.lp_iterations,
        )


def solve_milp(
    problem: MilpProblem,
    limits: MilpLimits | None = None,
    heuristic: Heuristic | None = None,
    initial: np.ndarray | None = None,
    **kwargs,
) -> MilpResult:
    """Solve a mixed binary program to optimality or until a limit binds."""
    return BranchAndBound(problem, limits, heuristic, **kwargs).solve(initial)
