"""Per-repetition records, their aggregation and the table renderers."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import Dataset

RELEVANT_INDEX = 1  # the second selectable column; column 0 is the constant
INTERCEPT_INDEX = 0
TABLE_ROWS = ("Corr_sel", "Orac_sel", "Num_irrel", "in_RR", "out_RR")


@dataclass(frozen=True)
class RelativeRisk:
    value: float  # nan when undefined
    classifier_risk: float
    bayes_risk: float

    @property
    def defined(self) -> bool:
        return not math.isnan(self.value)


def relative_risk(classifier_risk: float, bayes_risk: float) -> RelativeRisk:
    """Ratio of the two risks; undefined (nan) when the Bayes risk is zero."""
    if bayes_risk < 0 or classifier_risk < 0:
        raise ValueError("risks must be nonnegative")
    value = classifier_risk / bayes_risk if bayes_risk > 0 else float("nan")
    return RelativeRisk(value, float(classifier_risk), float(bayes_risk))


def misclassification_risk(dataset: Dataset, predictions) -> float:
    return float(np.mean(np.asarray(predictions, dtype=bool) != (dataset.labels == 1)))


def expected_risk(eta, predictions) -> float:
    """Mean of ``E[1{Y != pred} | X]``; lower-variance than the 0-1 average."""
    eta = np.asarray(eta, dtype=float)
    pred = np.asarray(predictions, dtype=bool)
    return float(np.mean(np.where(pred, 1.0 - eta, eta)))


@dataclass
class RepetitionRecord:
    method: str
    rep: int
    in_risk: float
    out_risk: float
    bayes_in_risk: float
    bayes_out_risk: float
    selected: tuple | None  # None for methods without a coefficient vector
    runtime: float = 0.0
    solver_gap: float = float("nan")
    status: str = "ok"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("in_risk", "out_risk", "bayes_in_risk", "bayes_out_risk"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.selected is not None:
            self.selected = tuple(sorted(int(j) for j in self.selected))

    @property
    def in_rr(self) -> RelativeRisk:
        return relative_risk(self.in_risk, self.bayes_in_risk)

    @property
    def out_rr(self) -> RelativeRisk:
        return relative_risk(self.out_risk, self.bayes_out_risk)


class SelectionMetrics(NamedTuple):
    corr_sel: float
    orac_sel: float
    num_irrel: float
    num_irrel_excl_intercept: float


def selection_metrics(selected_sets, relevant=RELEVANT_INDEX, true_support=None,
                      intercept=INTERCEPT_INDEX) -> SelectionMetrics:
    """Selection rates over repetitions.

    ``selected_sets`` holds, per repetition, the indices whose coefficient
    magnitude exceeds the selection tolerance. The intercept counts as an
    irrelevant column in ``num_irrel`` and must be absent for an oracle
    selection; ``num_irrel_excl_intercept`` leaves it out.
    """
    sets = [frozenset(s) for s in selected_sets]
    if not sets:
        raise ValueError("need at least one repetition")
    truth = frozenset([relevant] if true_support is None else true_support)
    corr = np.mean([relevant in s for s in sets])
    orac = np.mean([s == truth for s in sets])
    irrel = np.mean([len(s - truth) for s in sets])
    irrel_x = np.mean([len(s - truth - {intercept}) for s in sets])
    return SelectionMetrics(float(corr), float(orac), float(irrel), float(irrel_x))


@dataclass
class MetricsReport:
    method: str
    reps: int
    failures: int
    in_RR: float
    out_RR: float
    Corr_sel: float | None
    Orac_sel: float | None
    Num_irrel: float | None
    Num_irrel_excl_intercept: float | None
    undefined_ratios: int = 0

    @property
    def has_selection(self) -> bool:
        return self.Corr_sel is not None

    def row(self) -> dict:
        return {
            "method": self.method,
            "reps": self.reps,
            "failures": self.failures,
            "Corr_sel": self.Corr_sel,
            "Orac_sel": self.Orac_sel,
            "Num_irrel": self.Num_irrel,
            "Num_irrel_excl_intercept": self.Num_irrel_excl_intercept,
            "in_RR": self.in_RR,
            "out_RR": self.out_RR,
            "undefined_ratios": self.undefined_ratios,
        }


def _mean_defined(values) -> tuple[float, int]:
    vals = [v.value for v in values if v.defined]
    return (float(np.mean(vals)) if vals else float("nan")), len(values) - len(vals)


def aggregate(records, failures: int = 0, relevant=RELEVANT_INDEX) -> MetricsReport:
    """Average the records of one method; ratios that are undefined are skipped and counted."""
    records = list(records)
    if not records:
        raise ValueError("no successful repetitions to aggregate")
    methods = {r.method for r in records}
    if len(methods) > 1:
        raise ValueError(f"records mix methods {sorted(methods)}")
    in_rr, bad_in = _mean_defined([r.in_rr for r in records])
    out_rr, bad_out = _mean_defined([r.out_rr for r in records])
    if all(r.selected is not None for r in records):
        sel = selection_metrics([r.selected for r in records], relevant)
        corr, orac, irr, irr_x = sel.corr_sel, sel.orac_sel, sel.num_irrel, sel.num_irrel_excl_intercept
    else:
        corr = orac = irr = irr_x = None
    return MetricsReport(records[0].method, len(records), failures, in_rr, out_rr,
                         corr, orac, irr, irr_x, bad_in + bad_out)


def _fmt(value, digits):
    if value is None:
        return "-"
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return f"{value:.{digits}f}"


_DIGITS = {"Corr_sel": 2, "Orac_sel": 2, "Num_irrel": 2, "in_RR": 3, "out_RR": 3}


def render_table(reports, title: str = "") -> str:
    """Aligned text table: one column per method, one row per measure."""
    reports = list(reports)
    header = [""] + [r.method for r in reports]
    body = [[name] + [_fmt(getattr(r, name), _DIGITS[name]) for r in reports] for name in TABLE_ROWS]
    body.append(["reps"] + [f"{r.reps}" + (f" ({r.failures} failed)" if r.failures else "") for r in reports])
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = [title] if title else []
    for row in [header] + body:
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    if any(not r.has_selection for r in reports):
        lines.append("'-': method has no coefficient vector, selection measures not defined")
    return "\n".join(lines) + "\n"


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    fields = list(MetricsReport("", 0, 0, 0.0, 0.0, None, None, None, None).row())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in reports:
        row = r.row()
        w.writerow([_csv_value(row[k]) for k in fields])
    return buf.getvalue()


def records_to_csv(records) -> str:
    """Per-repetition outcomes without timing or solver-progress fields."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "rep", "in_risk", "out_risk", "bayes_in_risk", "bayes_out_risk", "selected"])
    for r in records:
        sel = "" if r.selected is None else " ".join(str(j) for j in r.selected)
        w.writerow([r.method, r.rep, repr(r.in_risk), repr(r.out_risk),
                    repr(r.bayes_in_risk), repr(r.bayes_out_risk), sel])
    return buf.getvalue()
