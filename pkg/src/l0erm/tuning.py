"""Penalty level choices for the l0-penalized fit.

Two rules are offered: ``c * sqrt(ln(max(p, n)) / n)`` and the practical
``v * ln ln(max(p, n)) * sqrt(ln(max(p, n)) / n)`` with ``v = h(1 - h)``,
where ``h`` is the best intercept-only training risk.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .core import Dataset, ParameterBox, empirical_risk
from .erm import fit_intercept_only, fit_penalized
from .milp import MilpLimits

MODES = ("condition2", "heuristic", "fixed")


@dataclass(frozen=True)
class TuningSpec:
    """How lambda is chosen; ``constant`` is c, v or lambda itself depending on ``mode``.

    For ``mode="heuristic"`` a ``None`` constant means "estimate v from the data".
    """

    mode: str = "heuristic"
    constant: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown tuning mode {self.mode!r}; expected one of {MODES}")
        if self.constant is not None and not self.constant >= 0:
            raise ValueError("tuning constant must be nonnegative")
        if self.mode == "condition2" and not (self.constant or 0) > 0:
            raise ValueError("condition2 tuning needs a positive constant c")
        if self.mode == "fixed" and self.constant is None:
            raise ValueError("fixed tuning needs the lambda value")

    def resolve(self, dataset: Dataset) -> tuple[float, dict]:
        """Return lambda for ``dataset`` along with the values used to get it."""
        n, p = dataset.n, dataset.p
        if self.mode == "fixed":
            lam = float(self.constant)
            return lam, {"mode": "fixed", "lambda": lam}
        if self.mode == "condition2":
            lam = lambda_condition2(self.constant, n, p)
            return lam, {"mode": "condition2", "c": self.constant, "lambda": lam}
        v = heuristic_v(dataset) if self.constant is None else float(self.constant)
        lam = lambda_heuristic(n, p, v)
        return lam, {"mode": "heuristic", "v": v, "lambda": lam}

    def to_dict(self) -> dict:
        return asdict(self)


def _log_dim(n: int, p: int) -> float:
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    return math.log(max(p, n))


def lambda_condition2(c: float, n: int, p: int) -> float:
    if not c > 0:
        raise ValueError("c must be positive")
    lam = c * math.sqrt(_log_dim(n, p) / n)
    if lam == 0.0:
        warnings.warn("max(p, n) = 1 gives lambda = 0", RuntimeWarning)
    return lam


def lambda_heuristic(n: int, p: int, v: float) -> float:
    if not v >= 0:
        raise ValueError("v must be nonnegative")
    if max(p, n) < 3:
        raise ValueError("ln ln(max(p, n)) needs max(p, n) >= 3")
    L = _log_dim(n, p)
    lam = v * math.log(L) * math.sqrt(L / n)
    if lam <= 0:
        warnings.warn("heuristic lambda is not positive; no sparsity pressure", RuntimeWarning)
    return lam


def heuristic_v(dataset: Dataset) -> float:
    h, _ = fit_intercept_only(dataset)
    return h * (1.0 - h)


@dataclass
class VCalibration:
    grid: np.ndarray
    cv_risk: np.ndarray
    v_best: float


def calibrate_v(
    dataset: Dataset,
    grid=(0.05, 0.1, 0.15, 0.2, 0.25),
    folds: int = 5,
    seed: int | np.random.Generator = 0,
    box: ParameterBox | None = None,
    limits: MilpLimits | None = None,
) -> VCalibration:
    """Pick v by K-fold validation of the l0-penalized fit (0-1 loss).

    Each (v, fold) pair is an independent MILP, so this is expensive; ties
    go to the larger v.
    """
    from .lasso import fold_assignment

    grid = np.asarray(grid, dtype=float)
    if dataset.n < folds:
        raise ValueError(f"need at least {folds} samples for {folds}-fold CV")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.Philox(seed))
    assign = fold_assignment(dataset.n, folds, rng)
    risk = np.zeros(len(grid))
    for f in range(folds):
        train = dataset.subset(np.flatnonzero(assign != f))
        held = dataset.subset(np.flatnonzero(assign == f))
        for i, v in enumerate(grid):
            lam = lambda_heuristic(train.n, train.p, v) if v > 0 else 0.0
            res = fit_penalized(train, box, lam, limits=limits)
            risk[i] += held.n * empirical_risk(held, res.theta_hat)
    risk /= dataset.n
    best = np.flatnonzero(risk <= risk.min())[-1]
    return VCalibration(grid, risk, float(grid[best]))

