"""l1-penalized logistic regression baseline.

The intercept and the always-included feature x1 are unpenalized; every
other selectable column gets an l1 penalty. Penalized columns are
standardised (mean 0, population sd 1) before fitting and coefficients are
mapped back to the original scale. Each lambda is solved by proximal Newton
steps (coordinate descent on the local quadratic) with a backtracking line
search, warm-started along a log-spaced decreasing grid.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, LinearClassifier

NEG_X1_WARNING = "x1 coefficient is negative; dividing by its magnitude flips the fitted rule"


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _nll(eta, y):
    # mean of log(1 + e^eta) - y * eta, stable for large |eta|
    return float(np.mean(np.logaddexp(0.0, eta) - y * eta))


def _soft(z, t):
    return np.sign(z) * max(abs(z) - t, 0.0)


def find_intercept_column(xt: np.ndarray) -> int | None:
    """Index of the first column that is identically one, if any."""
    for j in range(xt.shape[1]):
        if np.all(xt[:, j] == 1.0):
            return j
    return None


@dataclass
class _Design:
    """Standardised design: column 0 intercept (if any), then x1, then penalized."""

    Z: np.ndarray
    penalized: np.ndarray  # bool per column of Z
    center: np.ndarray
    scale: np.ndarray
    has_intercept: bool
    pen_cols: list  # xt column index of each penalized Z column
    intercept_col: int | None


def _design(dataset: Dataset, intercept_col: int | None) -> _Design:
    n = dataset.n
    pen_cols = [j for j in range(dataset.p) if j != intercept_col]
    raw = np.column_stack([dataset.x1] + [dataset.xt[:, j] for j in pen_cols]) if pen_cols else dataset.x1[:, None]
    has_int = intercept_col is not None
    if has_int:
        center = raw.mean(axis=0)
        scale = raw.std(axis=0)
    else:
        center = np.zeros(raw.shape[1])
        scale = np.sqrt(np.mean(raw**2, axis=0))
    scale = np.where(scale > 0, scale, 1.0)
    std = (raw - center) / scale
    cols = ([np.ones(n)] if has_int else []) + [std[:, k] for k in range(std.shape[1])]
    Z = np.column_stack(cols)
    penalized = np.zeros(Z.shape[1], bool)
    penalized[(1 if has_int else 0) + 1 :] = True
    return _Design(Z, penalized, center, scale, has_int, pen_cols, intercept_col)


@dataclass
class LassoPath:
    lambdas: np.ndarray
    std_coefs: np.ndarray  # (K, columns of the standardised design)
    intercept: np.ndarray  # original scale, 0 when no intercept column
    beta_x1: np.ndarray
    coefs: np.ndarray  # (K, len(pen_cols)) original scale
    pen_cols: list
    intercept_col: int | None
    p: int
    converged: np.ndarray
    objective_traces: list = field(default_factory=list)
    kkt_residuals: np.ndarray | None = None

    def __len__(self):
        return len(self.lambdas)

    def linear_index(self, k: int, dataset: Dataset) -> np.ndarray:
        out = self.intercept[k] + self.beta_x1[k] * dataset.x1
        if self.pen_cols:
            out = out + dataset.xt[:, self.pen_cols] @ self.coefs[k]
        return out

    def raw_theta(self, k: int) -> np.ndarray:
        """Coefficients on the selectable columns before normalisation."""
        theta = np.zeros(self.p)
        if self.intercept_col is not None:
            theta[self.intercept_col] = self.intercept[k]
        theta[self.pen_cols] = self.coefs[k]
        return theta

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "intercept", "beta_x1"] + [f"x{j + 2}" for j in self.pen_cols] + ["converged"])
            for k in range(len(self)):
                w.writerow([repr(float(self.lambdas[k])), repr(float(self.intercept[k])), repr(float(self.beta_x1[k]))]
                           + [repr(float(v)) for v in self.coefs[k]] + [int(self.converged[k])])


class _Solver:
    def __init__(self, design: _Design, y: np.ndarray, tol: float, max_outer: int, max_sweeps: int):
        self.d = design
        self.y = y.astype(float)
        self.n = len(y)
        self.tol = tol
        self.max_outer = max_outer
        self.max_sweeps = max_sweeps

    def objective(self, b, lam):
        eta = self.d.Z @ b
        l1 = float(np.sum(np.abs(b[self.d.penalized])))
        return _nll(eta, self.y) + (lam * l1 if l1 > 0 else 0.0)

    def gradient(self, b):
        mu = _sigmoid(self.d.Z @ b)
        return self.d.Z.T @ (self.y - mu) / self.n

    def kkt_violation(self, b, lam) -> float:
        g = self.gradient(b)
        pen = self.d.penalized
        viol = np.abs(g[~pen])
        gp, bp = g[pen], b[pen]
        nz = bp != 0
        v_nz = np.abs(gp[nz] - lam * np.sign(bp[nz]))
        v_z = np.maximum(np.abs(gp[~nz]) - lam, 0.0)
        return float(max(viol.max(initial=0.0), v_nz.max(initial=0.0), v_z.max(initial=0.0)))

    def _inner(self, G, c, b0, lam, tol):
        """Minimise ``-c'd + d'Gd/2 + lam*|b0 + d|_1`` (penalized part) over ``b = b0 + d``.

        Covariance-form coordinate descent; after every sweep the support and
        signs it found are tried with an exact linear solve, which usually
        finishes the job in one or two sweeps.
        """
        pen = self.d.penalized
        diag = np.diag(G)
        b = b0.copy()
        grad = -c.copy()  # gradient of the smooth part at b
        for _ in range(self.max_sweeps):
            biggest = 0.0
            for j in range(len(b)):
                if diag[j] <= 0:
                    continue
                u = diag[j] * b[j] - grad[j]
                new = _soft(u, lam) / diag[j] if pen[j] else u / diag[j]
                delta = new - b[j]
                if delta != 0.0:
                    grad += G[:, j] * delta
                    b[j] = new
                    biggest = max(biggest, abs(delta) * np.sqrt(diag[j]))
            exact = self._support_solve(G, c, b0, b, lam)
            if exact is not None:
                return exact
            if biggest < tol:
                break
        return b

    def _support_solve(self, G, c, b0, b, lam):
        pen = self.d.penalized
        S = (~pen) | (b != 0)
        sgn = np.where(pen, np.sign(b), 0.0)
        shift = np.zeros_like(b)
        shift[sgn != 0] = lam * sgn[sgn != 0]
        rhs = c[S] + G[S] @ b0 - shift[S]
        try:
            xs = np.linalg.solve(G[np.ix_(S, S)], rhs)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(xs)) or np.any(sgn[S][pen[S]] * xs[pen[S]] <= 0):
            return None
        x = np.zeros_like(b)
        x[S] = xs
        grad = G @ (x - b0) - c
        off = ~S
        if np.any(np.abs(grad[off]) > lam * (1 + 1e-9) + 1e-15):
            return None
        return x

    def fit(self, b, lam):
        Z, y, n = self.d.Z, self.y, self.n
        pen = self.d.penalized
        trace = [self.objective(b, lam)]
        converged = False
        for _ in range(self.max_outer):
            viol = self.kkt_violation(b, lam)
            if viol <= self.tol:
                converged = True
                break
            # the quadratic model only needs to be solved a bit past the current residual
            inner_tol = max(1e-3 * viol, 1e-14)
            mu = _sigmoid(Z @ b)
            w = np.maximum(mu * (1 - mu), 1e-5)
            G = (Z * w[:, None]).T @ Z / n
            c = Z.T @ (y - mu) / n
            full = self._inner(G, c, b, lam, inner_tol)
            step = full - b
            f0 = trace[-1]
            t = 1.0
            while True:
                cand = b + t * step
                f1 = self.objective(cand, lam)
                if f1 <= f0 + 1e-13 * max(1.0, abs(f0)) or t < 1e-12:
                    break
                t *= 0.5
            if f1 > f0:
                break
            b = cand
            trace.append(f1)
        else:
            converged = self.kkt_violation(b, lam) <= self.tol
        return b, converged, trace


def _initial_unpenalized(solver: _Solver) -> np.ndarray:
    b = np.zeros(solver.d.Z.shape[1])
    b, _, _ = solver.fit(b, lam=np.inf)
    return b


def fit_logit_lasso_path(
    dataset: Dataset,
    grid_size: int = 100,
    lambda_min_ratio: float | None = None,
    lambdas=None,
    intercept_col: int | None | str = "auto",
    kkt_tol: float = 1e-8,
    max_outer: int = 100,
    max_sweeps: int = 1000,
) -> LassoPath:
    """Warm-started lasso path over a decreasing lambda grid.

    ``intercept_col="auto"`` treats the first all-ones column of ``xt`` as the
    intercept; pass ``None`` to fit without one.
    """
    if intercept_col == "auto":
        intercept_col = find_intercept_column(dataset.xt)
    design = _design(dataset, intercept_col)
    y = dataset.labels.astype(float)
    if y.min() == y.max():
        warnings.warn("training labels contain a single class; the fit diverges", RuntimeWarning)
    solver = _Solver(design, y, kkt_tol, max_outer, max_sweeps)
    b = _initial_unpenalized(solver)
    pen = design.penalized
    g = solver.gradient(b)
    lam_max = float(np.max(np.abs(g[pen]), initial=0.0))
    if lambdas is None:
        if lambda_min_ratio is None:
            lambda_min_ratio = 0.01 if dataset.p + 1 > dataset.n else 1e-4
        if lam_max <= 0:
            lam_max = 1e-6
        lambdas = lam_max * lambda_min_ratio ** (np.arange(grid_size) / max(grid_size - 1, 1))
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambdas must be strictly decreasing")

    K = len(lambdas)
    std = np.zeros((K, design.Z.shape[1]))
    conv = np.zeros(K, bool)
    kkt = np.zeros(K)
    traces = []
    for k, lam in enumerate(lambdas):
        b, ok, tr = solver.fit(b, lam)
        std[k] = b
        conv[k] = ok
        kkt[k] = solver.kkt_violation(b, lam)
        traces.append(tr)
    off = 1 if design.has_intercept else 0
    slopes = std[:, off:] / design.scale
    intercept = (std[:, 0] if design.has_intercept else np.zeros(K)) - slopes @ design.center
    return LassoPath(
        lambdas=lambdas,
        std_coefs=std,
        intercept=intercept if design.has_intercept else np.zeros(K),
        beta_x1=slopes[:, 0],
        coefs=slopes[:, 1:],
        pen_cols=design.pen_cols,
        intercept_col=intercept_col,
        p=dataset.p,
        converged=conv,
        objective_traces=traces,
        kkt_residuals=kkt,
    )


def lasso_kkt_residuals(dataset: Dataset, path: LassoPath) -> np.ndarray:
    """Recompute the subgradient optimality residual at every path point."""
    design = _design(dataset, path.intercept_col)
    solver = _Solver(design, dataset.labels, 0.0, 0, 0)
    return np.array([solver.kkt_violation(path.std_coefs[k], lam) for k, lam in enumerate(path.lambdas)])


@dataclass
class CvResult:
    lambdas: np.ndarray
    mean_risk: np.ndarray
    se: np.ndarray
    index_opt: int
    index_1se: int
    path: LassoPath
    fold_risks: np.ndarray

    @property
    def lambda_opt(self) -> float:
        return float(self.lambdas[self.index_opt])

    @property
    def lambda_1se(self) -> float:
        return float(self.lambdas[self.index_1se])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "cv_risk", "cv_se", "is_opt", "is_1se"])
            for k, lam in enumerate(self.lambdas):
                w.writerow([repr(float(lam)), repr(float(self.mean_risk[k])), repr(float(self.se[k])),
                            int(k == self.index_opt), int(k == self.index_1se)])


def fold_assignment(n: int, folds: int, rng: np.random.Generator, labels=None) -> np.ndarray:
    """Shuffled round-robin folds; stratified by class when labels are given."""
    out = np.empty(n, dtype=np.int64)
    if labels is None:
        perm = rng.permutation(n)
        out[perm] = np.arange(n) % folds
        return out
    start = 0
    for cls in (0, 1):
        idx = np.flatnonzero(np.asarray(labels) == cls)
        perm = rng.permutation(idx)
        out[perm] = (start + np.arange(len(idx))) % folds
        start += len(idx)
    return out


def cross_validate(
    dataset: Dataset,
    folds: int = 10,
    grid_size: int = 100,
    lambda_min_ratio: float | None = None,
    seed: int | np.random.Generator = 0,
    stratified: bool = False,
    **fit_kwargs,
) -> CvResult:
    """K-fold misclassification CV with the min-risk and one-standard-error picks."""
    if dataset.n < folds:
        raise ValueError(f"need at least {folds} samples for {folds}-fold CV")
    full = fit_logit_lasso_path(dataset, grid_size, lambda_min_ratio, **fit_kwargs)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.Philox(seed))
    assign = fold_assignment(dataset.n, folds, rng, dataset.labels if stratified else None)
    risks = np.zeros((folds, len(full)))
    for f in range(folds):
        test = assign == f
        train, held = dataset.subset(np.flatnonzero(~test)), dataset.subset(np.flatnonzero(test))
        if held.labels.min() == held.labels.max() or train.labels.min() == train.labels.max():
            warnings.warn(f"fold {f} contains a single class", RuntimeWarning)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            path = fit_logit_lasso_path(train, lambdas=full.lambdas, intercept_col=full.intercept_col, **fit_kwargs)
        y = held.labels == 1
        for k in range(len(full)):
            pred = path.linear_index(k, held) >= 0
            risks[f, k] = np.mean(pred != y)
    mean = risks.mean(axis=0)
    se = risks.std(axis=0, ddof=1) / np.sqrt(folds)
    best = mean.min()
    # ties go to the larger lambda, i.e. the earlier grid index
    i_opt = int(np.flatnonzero(mean <= best)[0])
    i_1se = int(np.flatnonzero(mean <= best + se[i_opt])[0])
    return CvResult(full.lambdas, mean, se, i_opt, i_1se, full, risks)


@dataclass
class NormalizedLasso:
    classifier: LinearClassifier
    degenerate: bool
    negative_x1: bool


def normalize_to_classifier(path: LassoPath, k: int) -> NormalizedLasso:
    """Divide the selectable coefficients by ``|beta_x1|``.

    The magnitude (not the signed value) is used; a negative x1 coefficient is
    reported through ``negative_x1``. When ``|beta_x1| < 1e-12`` the raw
    coefficients are returned with ``degenerate`` set.
    """
    beta1 = float(path.beta_x1[k])
    raw = path.raw_theta(k)
    if abs(beta1) < 1e-12:
        return NormalizedLasso(LinearClassifier(raw), True, False)
    if beta1 < 0:
        warnings.warn(NEG_X1_WARNING, RuntimeWarning)
    return NormalizedLasso(LinearClassifier(raw / abs(beta1)), False, beta1 < 0)


def normalize_coefficients(beta_x1: float, theta_raw) -> NormalizedLasso:
    """Same rule as :func:`normalize_to_classifier` for loose coefficients."""
    theta_raw = np.asarray(theta_raw, dtype=float)
    if abs(beta_x1) < 1e-12:
        return NormalizedLasso(LinearClassifier(theta_raw), True, False)
    return NormalizedLasso(LinearClassifier(theta_raw / abs(beta_x1)), False, beta_x1 < 0)
