"""l0-penalized empirical risk minimisation through the binary program.

Variable layout of the generated problem: ``theta`` (p continuous), then
``d`` (n binaries, d_i = predicted label of sample i), then ``e``
(p binaries, e_j = 1 when feature j may be nonzero).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import SELECTION_TOL, Dataset, ParameterBox, empirical_risk, l0_norm, selected_indices
from .milp import GE, LE, BoundedSimplex, MilpLimits, MilpProblem, MilpResult, solve_milp

log = logging.getLogger(__name__)

DEFAULT_DELTA = 1e-6


class FitError(RuntimeError):
    """The solver stopped without any feasible classifier."""

    def __init__(self, message: str, result: MilpResult | None = None):
        super().__init__(message)
        self.result = result


@dataclass
class FitResult:
    theta_hat: np.ndarray
    selected: list
    risk_milp: float
    risk_recomputed: float
    penalty: float
    objective: float
    lam: float
    solver: MilpResult
    max_features: int | None = None
    repaired: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def boundary_discrepancy(self) -> float:
        return abs(self.risk_milp - self.risk_recomputed)

    @property
    def status(self) -> str:
        return self.solver.status

    def to_dict(self) -> dict:
        out = {
            "theta": [float(v) for v in self.theta_hat],
            "selected": list(self.selected),
            "risk_milp": self.risk_milp,
            "risk_recomputed": self.risk_recomputed,
            "boundary_discrepancy": self.boundary_discrepancy,
            "penalty": self.penalty,
            "objective": self.objective,
            "lambda": self.lam,
        }
        if self.max_features is not None:
            out["max_features"] = self.max_features
        out["solver"] = self.solver.summary()
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def big_m(dataset: Dataset, box: ParameterBox) -> np.ndarray:
    """``max |x1_i + xt_i @ theta|`` over the box, row by row.

    A linear function attains its extremes over a box at a vertex, so the
    max and min come from per-coordinate choices of the bound.
    """
    if box.p != dataset.p:
        raise ValueError("box dimension does not match dataset")
    lo_prod = dataset.xt * box.lower
    hi_prod = dataset.xt * box.upper
    top = dataset.x1 + np.maximum(lo_prod, hi_prod).sum(axis=1)
    bottom = dataset.x1 + np.minimum(lo_prod, hi_prod).sum(axis=1)
    return np.maximum(np.abs(top), np.abs(bottom))


def _var_names(n: int, p: int) -> list[str]:
    return [f"theta{j + 1}" for j in range(p)] + [f"d{i + 1}" for i in range(n)] + [f"e{j + 1}" for j in range(p)]


def build_penalized_milp(
    dataset: Dataset,
    box: ParameterBox,
    lam: float,
    delta: float = DEFAULT_DELTA,
    max_features: int | None = None,
) -> MilpProblem:
    """Binary program whose optimum equals the penalized ERM optimum.

    With ``max_features`` set the problem is the cardinality-constrained
    variant (the penalty term is still ``lam * sum(e)``; pass ``lam=0``
    for the pure constrained risk).
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if not delta > 0:
        raise ValueError("delta must be positive")
    if box.p != dataset.p:
        raise ValueError("box dimension does not match dataset")
    bad = np.flatnonzero((box.lower == box.upper) & (box.lower != 0))
    if len(bad):
        raise ValueError(f"zero-width box coordinate with nonzero value at index {int(bad[0])}")
    n, p = dataset.n, dataset.p
    y = dataset.labels.astype(float)
    M = big_m(dataset, box)

    objective = np.concatenate([np.zeros(p), -(2 * y - 1) / n, np.full(p, float(lam))])
    lower = np.concatenate([box.lower, np.zeros(n + p)])
    upper = np.concatenate([box.upper, np.ones(n + p)])
    is_binary = np.concatenate([np.zeros(p, bool), np.ones(n + p, bool)])
    prob = MilpProblem(
        objective, lower, upper, is_binary,
        var_names=_var_names(n, p), objective_offset=float(y.sum()) / n,
    )
    for i in range(n):
        row = {j: dataset.xt[i, j] for j in range(p) if dataset.xt[i, j] != 0.0}
        # score_i >= (d_i - 1) M_i
        prob.add_constraint({**row, p + i: -M[i]}, GE, -M[i] - dataset.x1[i])
        # score_i <= d_i (M_i + delta); non-strict, ties are diagnosed later
        prob.add_constraint({**row, p + i: -(M[i] + delta)}, LE, -dataset.x1[i])
    for j in range(p):
        e = p + n + j
        prob.add_constraint({j: 1.0, e: -box.lower[j]}, GE, 0.0)
        prob.add_constraint({j: 1.0, e: -box.upper[j]}, LE, 0.0)
    if max_features is not None:
        if not 0 <= max_features <= p:
            raise ValueError("max_features must lie in [0, p]")
        prob.add_constraint({p + n + j: 1.0 for j in range(p)}, LE, float(max_features))
    return prob


# -- primal heuristics -------------------------------------------------------


def _objective(errors: int, n: int, support: int, lam: float) -> float:
    return errors / n + lam * support


def coordinate_polish(
    dataset: Dataset,
    box: ParameterBox,
    theta,
    lam: float,
    max_features: int | None = None,
    sweeps: int = 10,
) -> np.ndarray:
    """Exact one-coordinate-at-a-time descent on ``risk + lam * ||theta||_0``.

    Along one coordinate the 0-1 risk is piecewise constant with jumps at
    ``-a_i / x_ij``; every cell is probed at its midpoint (plus the box ends
    and zero), so the returned point never sits on a decision boundary
    unless it started there and nothing better exists.
    """
    theta = np.clip(np.asarray(theta, dtype=float).copy(), box.lower, box.upper)
    y = dataset.labels == 1
    n = dataset.n
    xt = dataset.xt
    score = dataset.scores(theta)
    support = int(np.count_nonzero(theta))
    cur = _objective(int(np.count_nonzero((score >= 0) != y)), n, support, lam)
    for _ in range(sweeps):
        improved = False
        for j in range(dataset.p):
            col = xt[:, j]
            lo, hi = box.lower[j], box.upper[j]
            if lo == hi:
                continue
            others = support - (theta[j] != 0)
            if theta[j] == 0 and max_features is not None and others >= max_features:
                continue
            a = score - col * theta[j]
            nz = col != 0
            bps = -a[nz] / col[nz]
            bps = bps[(bps > lo) & (bps < hi)]
            pts = np.unique(np.concatenate([[lo, hi], bps]))
            cands = [theta[j]]
            if lo <= 0.0 <= hi:
                cands.append(0.0)
            cands.extend([lo, hi])
            cands.extend((pts[:-1] + pts[1:]) / 2)
            cands = np.asarray(cands)
            if max_features is not None and others >= max_features:
                cands = cands[cands == 0.0]
            errs = _count_errors(a, col, cands, y)
            objs = errs / n + lam * (others + (cands != 0))
            k = int(np.argmin(objs))
            if objs[k] < cur - 1e-12:
                theta[j] = cands[k]
                score = a + col * theta[j]
                support = others + int(theta[j] != 0)
                cur = float(objs[k])
                improved = True
        if not improved:
            break
    return theta


def _count_errors(a, col, cands, y, chunk: int = 4_000_000) -> np.ndarray:
    n = len(a)
    out = np.empty(len(cands))
    step = max(1, chunk // max(n, 1))
    for s in range(0, len(cands), step):
        t = cands[s : s + step]
        pred = (a[:, None] + col[:, None] * t[None, :]) >= 0
        out[s : s + step] = np.count_nonzero(pred != y[:, None], axis=0)
    return out


def milp_point(dataset: Dataset, theta) -> np.ndarray:
    """Full variable vector for ``theta`` with d and e read off directly."""
    theta = np.asarray(theta, dtype=float)
    d = (dataset.scores(theta) >= 0).astype(float)
    e = (theta != 0).astype(float)
    return np.concatenate([theta, d, e])


class ErmHeuristic:
    """Turns a node relaxation into a classifier and polishes it."""

    def __init__(self, dataset, box, lam, max_features=None, sweeps=10, eager_calls=200, every=10):
        self.dataset, self.box, self.lam = dataset, box, lam
        self.eager_calls = eager_calls
        self.every = every
        self.calls = 0
        self.max_features = max_features
        self.sweeps = sweeps
        self.scale = dataset.xt.std(axis=0) + 1e-12 if dataset.p else np.ones(0)
        self._seen: set = set()

    def start(self) -> np.ndarray:
        theta0 = np.clip(np.zeros(self.dataset.p), self.box.lower, self.box.upper)
        return self.polish(theta0)

    def polish(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).copy()
        if self.max_features is not None and np.count_nonzero(theta) > self.max_features:
            keep = np.argsort(-np.abs(theta) * self.scale, kind="stable")[: self.max_features]
            mask = np.zeros(len(theta), bool)
            mask[keep] = True
            theta[~mask] = 0.0
            theta = np.clip(theta, self.box.lower, self.box.upper)
        theta = coordinate_polish(self.dataset, self.box, theta, self.lam, self.max_features, self.sweeps)
        return milp_point(self.dataset, theta)

    def __call__(self, x: np.ndarray):
        self.calls += 1
        if self.calls > self.eager_calls and self.calls % self.every:
            return None
        p = self.dataset.p
        theta = x[:p].copy()
        theta[np.abs(theta) <= 1e-9] = 0.0
        key = tuple(np.round(theta, 9))
        if key in self._seen:
            return None
        self._seen.add(key)
        if len(self._seen) > 100_000:
            self._seen.clear()
        return self.polish(theta)


# -- fitting -------------------------------------------------------------------


def _repair_ties(dataset: Dataset, box: ParameterBox, theta, d, e) -> np.ndarray | None:
    """Move ``theta`` strictly inside the cell implied by the labels ``d``.

    Maximises a common margin ``t`` (capped at 1) with the support fixed;
    returns None when no positive margin exists.
    """
    n, p = dataset.n, dataset.p
    lower = np.where(e > 0.5, box.lower, 0.0)
    upper = np.where(e > 0.5, box.upper, 0.0)
    obj = np.zeros(p + 1)
    obj[p] = -1.0
    A = np.zeros((n, p + 1))
    rhs = np.empty(n)
    senses = []
    for i in range(n):
        A[i, :p] = dataset.xt[i]
        if d[i] > 0.5:
            A[i, p] = -1.0  # score - t >= 0
            senses.append(GE)
        else:
            A[i, p] = 1.0  # score + t <= 0
            senses.append(LE)
        rhs[i] = -dataset.x1[i]
    sol = BoundedSimplex(obj, A, senses, rhs).solve(np.r_[lower, 0.0], np.r_[upper, 1.0])
    if sol.status != "optimal" or sol.values[p] <= 1e-9:
        return None
    return sol.values[:p]


def _fit(dataset, box, lam, delta, limits, max_features, use_heuristic) -> FitResult:
    box = box or ParameterBox.symmetric(dataset.p)
    prob = build_penalized_milp(dataset, box, lam, delta, max_features)
    heuristic = ErmHeuristic(dataset, box, lam, max_features) if use_heuristic else None
    initial = heuristic.start() if heuristic is not None else None
    res = solve_milp(prob, limits or MilpLimits(), heuristic, initial)
    if res.incumbent is None:
        if res.status == "infeasible":
            raise FitError("binary program is infeasible for this box", res)
        raise FitError(f"solver stopped ({res.status}) before finding a feasible classifier", res)
    n, p = dataset.n, dataset.p
    x = res.incumbent
    theta = np.clip(x[:p], box.lower, box.upper)
    d = np.round(x[p : p + n])
    e = np.round(x[p + n :])
    theta[e < 0.5] = 0.0
    y = dataset.labels.astype(float)
    risk_milp = float(np.sum(y - (2 * y - 1) * d)) / n
    repaired = False
    if np.any((dataset.scores(theta) >= 0) != (d > 0.5)):
        fixed = _repair_ties(dataset, box, theta, d, e)
        if fixed is not None:
            theta, repaired = fixed, True
    risk = empirical_risk(dataset, theta)
    k = l0_norm(theta, SELECTION_TOL)
    return FitResult(
        theta_hat=theta,
        selected=selected_indices(theta, SELECTION_TOL),
        risk_milp=risk_milp,
        risk_recomputed=risk,
        penalty=lam * k,
        objective=risk_milp + lam * float(e.sum()),
        lam=float(lam),
        solver=res,
        max_features=max_features,
        repaired=repaired,
    )


def fit_penalized(
    dataset: Dataset,
    box: ParameterBox | None = None,
    lam: float = 0.0,
    delta: float = DEFAULT_DELTA,
    limits: MilpLimits | None = None,
    use_heuristic: bool = True,
) -> FitResult:
    """Minimise ``S_n(theta) + lam * ||theta||_0`` over the box."""
    return _fit(dataset, box, lam, delta, limits, None, use_heuristic)


def fit_constrained(
    dataset: Dataset,
    box: ParameterBox | None = None,
    m: int = 0,
    delta: float = DEFAULT_DELTA,
    limits: MilpLimits | None = None,
    use_heuristic: bool = True,
) -> FitResult:
    """Minimise the empirical risk subject to at most ``m`` nonzero coefficients."""
    if not 0 <= m <= dataset.p:
        raise ValueError("m must lie in [0, p]")
    return _fit(dataset, box, 0.0, delta, limits, m, use_heuristic)


def fit_intercept_only(dataset: Dataset, t_range=(-10.0, 10.0)) -> tuple[float, float]:
    """Best risk of ``1{x1 + t >= 0}`` over ``t`` in ``t_range``.

    The risk is a right-continuous step function of ``t`` that only jumps at
    ``t = -x1_i``, so the left end and the breakpoints inside the range
    cover every value. Returns ``(h, t_star)`` with the smallest minimiser.
    """
    lo, hi = map(float, t_range)
    if not lo <= hi:
        raise ValueError("t_range must be nonempty")
    bps = -dataset.x1
    cands = np.unique(np.concatenate([[lo], bps[(bps > lo) & (bps <= hi)]]))
    pred = (dataset.x1[:, None] + cands[None, :]) >= 0
    errs = np.count_nonzero(pred != (dataset.labels == 1)[:, None], axis=0)
    k = int(np.argmin(errs))
    return float(errs[k]) / dataset.n, float(cands[k])
