"""Datasets, parameter boxes and the linear threshold classifier."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SELECTION_TOL = 1e-6


@dataclass(frozen=True)
class Dataset:
    """n labelled samples ``(y, x1, xt)``.

    ``x1`` is the feature that always enters the classifier with unit
    coefficient; ``xt`` holds the p features subject to selection.
    """

    labels: np.ndarray
    x1: np.ndarray
    xt: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        x1 = np.asarray(self.x1, dtype=float).ravel()
        xt = np.asarray(self.xt, dtype=float)
        if xt.ndim == 1:
            xt = xt.reshape(len(x1), -1) if len(x1) else xt.reshape(0, 0)
        if len(labels) < 1:
            raise ValueError("dataset needs at least one sample")
        if len(x1) != len(labels) or xt.shape[0] != len(labels):
            raise ValueError(
                f"row counts differ: labels={len(labels)}, x1={len(x1)}, "
                f"xt={xt.shape[0]}"
            )
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be 0 or 1")
        if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(xt))):
            raise ValueError("features must be finite")
        for name, arr in (("labels", labels), ("x1", x1), ("xt", xt)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def p(self) -> int:
        return self.xt.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.labels[rows], self.x1[rows], self.xt[rows])

    def scores(self, theta) -> np.ndarray:
        theta = _check_theta(theta, self.p)
        return self.x1 + self.xt @ theta


@dataclass(frozen=True)
class ParameterBox:
    """Compact box ``prod_j [lower_j, upper_j]`` for the coefficients."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).ravel()
        upper = np.asarray(self.upper, dtype=float).ravel()
        if lower.shape != upper.shape:
            raise ValueError("lower and upper must have equal length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("box bounds must be finite")
        if np.any(lower > upper):
            raise ValueError("box needs lower <= upper")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def symmetric(cls, p: int, bound: float = 10.0) -> "ParameterBox":
        return cls(np.full(p, -bound), np.full(p, bound))

    @property
    def p(self) -> int:
        return len(self.lower)

    def contains(self, theta, tol: float = 1e-9) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.lower - tol) and np.all(theta <= self.upper + tol))


@dataclass(frozen=True)
class LinearClassifier:
    """The rule ``1{x1 + xt @ theta >= 0}``; the x1 coefficient is fixed at one."""

    theta: np.ndarray = field()

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).ravel()
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    def predict(self, dataset: Dataset) -> np.ndarray:
        return (dataset.scores(self.theta) >= 0).astype(np.int64)

    def risk(self, dataset: Dataset) -> float:
        return empirical_risk(dataset, self.theta)


def _check_theta(theta, p: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).ravel()
    if len(theta) != p:
        raise ValueError(f"theta has length {len(theta)}, expected {p}")
    return theta


def predict(theta, x1: float, xrow) -> int:
    """Classify a single observation; a score of exactly zero maps to 1."""
    xrow = np.asarray(xrow, dtype=float).ravel()
    theta = _check_theta(theta, len(xrow))
    if not (np.isfinite(x1) and np.all(np.isfinite(xrow)) and np.all(np.isfinite(theta))):
        raise ValueError("inputs must be finite")
    return int(x1 + float(xrow @ theta) >= 0)


def empirical_risk(dataset: Dataset, theta) -> float:
    """Fraction of samples misclassified by ``1{x1 + xt @ theta >= 0}``."""
    pred = dataset.scores(theta) >= 0
    return int(np.count_nonzero(pred != (dataset.labels == 1))) / dataset.n


def l0_norm(theta, tol: float = SELECTION_TOL) -> int:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return int(np.count_nonzero(np.abs(np.asarray(theta, dtype=float)) > tol))


def selected_indices(theta, tol: float = SELECTION_TOL) -> list[int]:
    return [int(j) for j in np.flatnonzero(np.abs(np.asarray(theta, dtype=float)) > tol)]


# CSV layout: header ``y,x1,x2,...,x{p+1}``; x2.. are the selectable features.


def write_csv(dataset: Dataset, path, extra: dict[str, np.ndarray] | None = None) -> None:
    extra = extra or {}
    header = ["y", "x1"] + [f"x{j + 2}" for j in range(dataset.p)] + list(extra)
    cols = [dataset.labels, dataset.x1] + [dataset.xt[:, j] for j in range(dataset.p)]
    cols += [np.asarray(v) for v in extra.values()]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(dataset.n):
            row = [str(int(cols[0][i]))] + [repr(float(c[i])) for c in cols[1:]]
            writer.writerow(row)


def read_csv(path) -> tuple[Dataset, dict[str, np.ndarray]]:
    """Read a dataset; columns after the ``x*`` block come back as extras."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        rows = [r for r in reader if r]
    header = [h.strip() for h in header]
    if header[:2] != ["y", "x1"]:
        raise ValueError(f"{path}: header must start with 'y,x1'")
    nx = 1
    while nx + 1 < len(header) and header[nx + 1] == f"x{nx + 1}":
        nx += 1
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    labels = data[:, 0]
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError(f"{path}: labels must be 0 or 1")
    ds = Dataset(labels.astype(np.int64), data[:, 1], data[:, 2 : nx + 1])
    extras = {name: data[:, k] for k, name in enumerate(header) if k > nx}
    return ds, extras
