"""Bounded-variable primal simplex.

Rows are turned into equalities ``A x - w = 0`` with one bounded logical
variable ``w`` per row, so the all-logical basis ``B = -I`` is always a
valid starting point and any previous basis can be reused after bounds
change. Phase 1 minimises the sum of bound violations of the basic
variables directly, without artificials.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.blas import dger

from .model import EQ, GE, LE, LpSolution, MilpProblem, SolverError

AT_LOWER, AT_UPPER, FREE, BASIC = 0, 1, 2, 3


@dataclass
class BasisState:
    basis: np.ndarray
    status: np.ndarray


class BoundedSimplex:
    """Reusable LP engine for one constraint matrix and varying bounds."""

    def __init__(
        self,
        objective,
        A,
        senses,
        rhs,
        feas_tol: float = 1e-9,
        opt_tol: float = 1e-9,
        pivot_tol: float = 1e-9,
        refactor_every: int = 64,
        stall_limit: int = 50,
        max_iter: int | None = None,
    ):
        A = np.asarray(A, dtype=float)
        m, n = A.shape
        self.m, self.n = m, n
        self.Af = np.hstack([A, -np.eye(m)]) if m else A.copy()
        self.cost = np.concatenate([np.asarray(objective, dtype=float), np.zeros(m)])
        row_lo = np.full(m, -np.inf)
        row_hi = np.full(m, np.inf)
        for i, (s, b) in enumerate(zip(senses, rhs)):
            if s in (GE, EQ):
                row_lo[i] = b
            if s in (LE, EQ):
                row_hi[i] = b
        self.row_lo, self.row_hi = row_lo, row_hi
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.pivot_tol = pivot_tol
        self.refactor_every = refactor_every
        self.stall_limit = stall_limit
        self.max_iter = max_iter or 50 * (m + n) + 1000

    @classmethod
    def from_problem(cls, problem: MilpProblem, **kwargs) -> "BoundedSimplex":
        A, rhs, senses = problem.dense()
        return cls(problem.objective, A, senses, rhs, **kwargs)

    # -- helpers -----------------------------------------------------------

    def _initial_state(self, lo, hi, warm):
        N = self.n + self.m
        if warm is not None:
            basis = warm.basis.copy()
            status = warm.status.copy()
            try:
                Binv = self._invert(basis)
                if np.all(np.isfinite(Binv)):
                    return basis, status, Binv
            except np.linalg.LinAlgError:
                pass
        basis = np.arange(self.n, N)
        status = np.full(N, AT_LOWER, dtype=np.int8)
        status[basis] = BASIC
        return basis, status, np.asfortranarray(-np.eye(self.m))

    @staticmethod
    def _place_nonbasic(status, lo, hi):
        """Snap nonbasic statuses onto bounds that actually exist."""
        x = np.zeros(len(status))
        nb = status != BASIC
        lo_f = np.isfinite(lo)
        hi_f = np.isfinite(hi)
        want_up = nb & (status == AT_UPPER) & hi_f
        want_lo = nb & ~want_up & lo_f
        fallback_up = nb & ~want_up & ~want_lo & hi_f
        free = nb & ~want_up & ~want_lo & ~fallback_up
        status[want_up | fallback_up] = AT_UPPER
        status[want_lo] = AT_LOWER
        status[free] = FREE
        x[want_up | fallback_up] = hi[want_up | fallback_up]
        x[want_lo] = lo[want_lo]
        return x

    def _basic_values(self, basis, status, x, Binv):
        nb = status != BASIC
        rhs = self.Af[:, nb] @ x[nb]
        x[basis] = -Binv @ rhs

    # -- main entry --------------------------------------------------------

    def solve(self, var_lower, var_upper, warm: BasisState | None = None) -> LpSolution:
        lo = np.concatenate([np.asarray(var_lower, dtype=float), self.row_lo])
        hi = np.concatenate([np.asarray(var_upper, dtype=float), self.row_hi])
        if np.any(lo > hi + self.feas_tol):
            return LpSolution("infeasible", None, np.inf)
        if self.m == 0:
            return self._solve_bounds_only(lo, hi)
        basis, status, Binv = self._initial_state(lo, hi, warm)
        x = self._place_nonbasic(status, lo, hi)
        self._basic_values(basis, status, x, Binv)

        ftol = self.feas_tol * (1.0 + np.abs(np.where(np.isfinite(lo), lo, 0.0)))
        ftol_hi = self.feas_tol * (1.0 + np.abs(np.where(np.isfinite(hi), hi, 0.0)))
        Af, cost = self.Af, self.cost
        N = len(cost)
        fixed = lo == hi
        iterations = 0
        if warm is not None and self._dual_feasible(basis, status, Binv, fixed):
            Binv, outcome, iterations = self._dual(basis, status, x, Binv, lo, hi, ftol, ftol_hi, fixed)
            if outcome == "infeasible":
                return LpSolution("infeasible", None, np.inf, iterations,
                                  BasisState(basis.copy(), status.copy()))
        since_refactor = 0
        bland = False
        stall = 0
        best_measure = np.inf
        last_phase = None
        verified = False

        while True:
            iterations += 1
            if iterations > self.max_iter:
                raise SolverError(
                    f"simplex iteration limit {self.max_iter} reached "
                    f"(m={self.m}, n={self.n}, bland={bland})"
                )
            if since_refactor >= self.refactor_every:
                Binv = self._refactor(basis)
                self._basic_values(basis, status, x, Binv)
                since_refactor = 0

            xB = x[basis]
            lB, uB = lo[basis], hi[basis]
            below = xB < lB - ftol[basis]
            above = xB > uB + ftol_hi[basis]
            phase1 = bool(below.any() or above.any())
            if phase1:
                cB = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                measure = float(np.sum((lB - xB)[below]) + np.sum((xB - uB)[above]))
                cfull = np.zeros(N)
            else:
                cB = cost[basis]
                cfull = cost
                measure = float(cost @ x)
            if phase1 != last_phase:
                best_measure = np.inf
                stall = 0
                bland = False
                last_phase = phase1
            if measure < best_measure - 1e-12 * (1.0 + abs(best_measure) if np.isfinite(best_measure) else 1.0):
                best_measure = measure
                stall = 0
                bland = False
            else:
                stall += 1
                if stall > self.stall_limit:
                    bland = True

            y = cB @ Binv
            d = cfull - y @ Af
            nb = status != BASIC
            inc_ok = nb & ~fixed & ((status == AT_LOWER) | (status == FREE)) & (d < -self.opt_tol)
            dec_ok = nb & ~fixed & ((status == AT_UPPER) | (status == FREE)) & (d > self.opt_tol)
            eligible = inc_ok | dec_ok
            if not eligible.any():
                if since_refactor > 0 and not verified:
                    # confirm the verdict on a fresh factorization
                    Binv = self._refactor(basis)
                    self._basic_values(basis, status, x, Binv)
                    since_refactor = 0
                    verified = True
                    continue
                if phase1:
                    return LpSolution("infeasible", None, np.inf, iterations,
                                      BasisState(basis.copy(), status.copy()))
                xs = np.clip(x[: self.n], lo[: self.n], hi[: self.n])
                return LpSolution("optimal", xs, float(cost[: self.n] @ xs), iterations,
                                  BasisState(basis.copy(), status.copy()))
            verified = False

            if bland:
                q = int(np.flatnonzero(eligible)[0])
            else:
                score = np.where(eligible, np.abs(d), -1.0)
                q = int(np.argmax(score))
            direction = 1.0 if inc_ok[q] else -1.0

            alpha = Binv @ Af[:, q]
            rate = -direction * alpha
            t_flip = hi[q] - lo[q] if np.isfinite(hi[q]) and np.isfinite(lo[q]) else np.inf

            r, t_basic, leave_to = self._ratio_test(
                xB, lB, uB, rate, alpha, below, above, ftol[basis], ftol_hi[basis], bland, basis
            )
            if t_flip <= t_basic:
                if not np.isfinite(t_flip):
                    if phase1:
                        raise SolverError("phase 1 found an unbounded ray; basis is numerically unreliable")
                    return LpSolution("unbounded", None, -np.inf, iterations)
                x[basis] = xB + rate * t_flip
                if status[q] == AT_LOWER:
                    status[q] = AT_UPPER
                    x[q] = hi[q]
                else:
                    status[q] = AT_LOWER
                    x[q] = lo[q]
                continue

            t = max(t_basic, 0.0)
            x[basis] = xB + rate * t
            x[q] = x[q] + direction * t
            leaving = basis[r]
            if leave_to == AT_LOWER:
                x[leaving] = lo[leaving]
            else:
                x[leaving] = hi[leaving]
            status[leaving] = AT_LOWER if (leave_to == AT_LOWER or lo[leaving] == hi[leaving]) else AT_UPPER
            if lo[leaving] == hi[leaving]:
                x[leaving] = lo[leaving]
            basis[r] = q
            status[q] = BASIC

            Binv = _pivot_update(Binv, alpha, r)
            since_refactor += 1

    def _dual_feasible(self, basis, status, Binv, fixed) -> bool:
        d = self.cost - (self.cost[basis] @ Binv) @ self.Af
        tol = self.opt_tol
        free = ~fixed
        bad = free & (
            ((status == AT_LOWER) & (d < -tol))
            | ((status == AT_UPPER) & (d > tol))
            | ((status == FREE) & (np.abs(d) > tol))
        )
        return not bad.any()

    def _dual(self, basis, status, x, Binv, lo, hi, ftol, ftol_hi, fixed):
        """Dual simplex from a dual feasible basis after bounds changed.

        Returns ``(Binv, outcome, iterations)``; outcome is ``feasible``
        (primal feasible, hence optimal), ``infeasible`` or ``fallback``
        when the iteration budget is spent and the primal should take over.
        """
        Af, cost = self.Af, self.cost
        budget = 10 * self.m + 100
        since = 0
        checked = False
        for it in range(1, budget + 1):
            if since >= self.refactor_every:
                Binv = self._refactor(basis)
                self._basic_values(basis, status, x, Binv)
                since = 0
            xB = x[basis]
            viol_lo = lo[basis] - ftol[basis] - xB
            viol_hi = xB - hi[basis] - ftol_hi[basis]
            infeas = np.maximum(viol_lo, viol_hi)
            r = int(np.argmax(infeas))
            if infeas[r] <= 0:
                return Binv, "feasible", it - 1
            d = cost - (cost[basis] @ Binv) @ Af
            row = Binv[r] @ Af
            nb = (status != BASIC) & ~fixed
            can_up = nb & ((status == AT_LOWER) | (status == FREE))
            can_down = nb & ((status == AT_UPPER) | (status == FREE))
            piv = self.pivot_tol
            if viol_lo[r] > 0:
                eligible = (can_up & (row < -piv)) | (can_down & (row > piv))
                target, leave_status = lo[basis[r]], AT_LOWER
            else:
                eligible = (can_up & (row > piv)) | (can_down & (row < -piv))
                target, leave_status = hi[basis[r]], AT_UPPER
            if not eligible.any():
                if since > 0 and not checked:
                    Binv = self._refactor(basis)
                    self._basic_values(basis, status, x, Binv)
                    since = 0
                    checked = True
                    continue
                return Binv, "infeasible", it
            checked = False
            idx = np.flatnonzero(eligible)
            ratio = np.abs(d[idx]) / np.abs(row[idx])
            rmin = float(ratio.min())
            near = np.flatnonzero(ratio <= rmin + self.opt_tol)
            k = near[np.argmax(np.abs(row[idx[near]]))]
            q = int(idx[k])
            alpha = Binv @ Af[:, q]
            step = (x[basis[r]] - target) / alpha[r]
            x[basis] -= alpha * step
            x[q] += step
            leaving = basis[r]
            x[leaving] = target
            status[leaving] = AT_LOWER if (leave_status == AT_LOWER or fixed[leaving]) else AT_UPPER
            basis[r] = q
            status[q] = BASIC
            Binv = _pivot_update(Binv, alpha, r)
            since += 1
        return Binv, "fallback", budget

    def _ratio_test(self, xB, lB, uB, rate, alpha, below, above, tol_lo, tol_hi, bland, basis):
        """Harris-style two-pass ratio test; returns (row, step, bound hit)."""
        m = len(xB)
        big = np.abs(alpha) > self.pivot_tol
        dec = big & (rate < 0)
        inc = big & (rate > 0)
        feasible = ~(below | above)

        # target bound per row and direction
        target = np.full(m, np.nan)
        hit = np.full(m, -1, dtype=np.int8)
        # decreasing: feasible rows stop at lower, rows above stop at upper
        sel = dec & feasible & np.isfinite(lB)
        target[sel], hit[sel] = lB[sel], AT_LOWER
        sel = dec & above
        target[sel], hit[sel] = uB[sel], AT_UPPER
        # increasing: feasible rows stop at upper, rows below stop at lower
        sel = inc & feasible & np.isfinite(uB)
        target[sel], hit[sel] = uB[sel], AT_UPPER
        sel = inc & below
        target[sel], hit[sel] = lB[sel], AT_LOWER

        active = hit >= 0
        if not active.any():
            return -1, np.inf, None
        idx = np.flatnonzero(active)
        dist = np.abs(target[idx] - xB[idx])
        # moving toward a bound from its feasible side can be slightly past it
        wrong_side = np.where(rate[idx] < 0, xB[idx] < target[idx], xB[idx] > target[idx])
        dist[wrong_side] = 0.0
        speed = np.abs(rate[idx])
        t_exact = dist / speed
        tol = np.where(hit[idx] == AT_LOWER, tol_lo[idx], tol_hi[idx])
        t_relaxed = (dist + tol) / speed
        t_max = float(np.min(t_relaxed))
        cand = t_exact <= t_max
        if bland:
            t_min = float(np.min(t_exact))
            ties = np.flatnonzero(t_exact <= t_min + 1e-12 * (1.0 + t_min))
            k = ties[np.argmin(basis[idx[ties]])]
        else:
            ci = np.flatnonzero(cand)
            k = ci[np.argmax(speed[ci])]
        row = int(idx[k])
        return row, float(t_exact[k]), int(hit[row])

    def _refactor(self, basis):
        try:
            Binv = self._invert(basis)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular basis during refactorization: {exc}") from exc
        if not np.all(np.isfinite(Binv)):
            raise SolverError("non-finite basis inverse")
        return Binv

    def _invert(self, basis):
        """Basis inverse exploiting the logical columns ``-e_i``.

        Only the block of structural columns against the rows whose logical
        is nonbasic needs a dense inverse.
        """
        m, n = self.m, self.n
        pos_s = np.flatnonzero(basis < n)
        pos_l = np.flatnonzero(basis >= n)
        rows_l = basis[pos_l] - n
        in_l = np.zeros(m, bool)
        in_l[rows_l] = True
        rows_r = np.flatnonzero(~in_l)
        cols = basis[pos_s]
        Binv = np.zeros((m, m))
        if len(cols):
            K = np.linalg.inv(self.Af[np.ix_(rows_r, cols)])
            # z_S = K rhs_R ; z_L = A_LS z_S - rhs_L
            Binv[np.ix_(pos_s, rows_r)] = K
            Binv[np.ix_(pos_l, rows_r)] = self.Af[np.ix_(rows_l, cols)] @ K
        Binv[pos_l, rows_l] = -1.0
        return np.asfortranarray(Binv)

    def _solve_bounds_only(self, lo, hi):
        c = self.cost
        x = np.zeros(len(c))
        for j, cj in enumerate(c):
            if cj > 0:
                x[j] = lo[j]
            elif cj < 0:
                x[j] = hi[j]
            else:
                x[j] = lo[j] if np.isfinite(lo[j]) else (hi[j] if np.isfinite(hi[j]) else 0.0)
            if not np.isfinite(x[j]):
                return LpSolution("unbounded", None, -np.inf)
        return LpSolution("optimal", x, float(c @ x))


def _pivot_update(Binv, alpha, r):
    """Product-form update of a Fortran-ordered basis inverse, in place."""
    prow = Binv[r] / alpha[r]
    Binv = dger(-1.0, alpha, prow, a=Binv, overwrite_a=1)
    Binv[r] = prow
    return Binv


def solve_lp(problem: MilpProblem, **kwargs) -> LpSolution:
    """Solve the continuous relaxation of ``problem``."""
    engine = BoundedSimplex.from_problem(problem, **kwargs)
    sol = engine.solve(problem.var_lower, problem.var_upper)
    if sol.status == "optimal":
        sol.objective += problem.objective_offset
    return sol
