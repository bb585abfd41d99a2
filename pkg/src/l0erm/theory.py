"""Finite-sample sparsity and excess-risk bounds as a numeric report.

Everything here is conditional on the constant ``M_sigma``, which is known
to exist but has no closed form; callers supply it. ``lambda`` follows the
rate ``c * sqrt(ln(max(p, n)) / n)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .tuning import lambda_condition2


@dataclass(frozen=True)
class TheoryInputs:
    q: int
    epsilon: float
    sigma: float
    M_sigma: float
    c: float
    n: int
    p: int

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be at least 1")
        if self.p < self.q:
            raise ValueError("q must not exceed p")
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        for name in ("sigma", "M_sigma", "c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Lemma1Bound:
    k: int
    threshold: float
    tail: float
    side_condition_ok: bool


def _side_condition(k: int, L: float, M_sigma: float) -> bool:
    lhs = 4 * (k + 1) * math.log(M_sigma * k * L)
    rhs = k * L + 6 * (k + 1) * math.log(2.0)
    return lhs <= rhs


def lemma1_bound(k: int, n: int, p: int, M_sigma: float, sigma: float) -> Lemma1Bound:
    """Uniform deviation threshold over k-sparse rules and its tail probability."""
    if not 1 <= k <= p:
        raise ValueError("k must lie in [1, p]")
    if n < 1 or M_sigma <= 0 or sigma <= 0:
        raise ValueError("n, M_sigma and sigma must be positive")
    L = math.log(max(p, n))
    return Lemma1Bound(
        k=k,
        threshold=math.sqrt(M_sigma * k * L / n),
        tail=math.exp(-sigma * k * L),
        side_condition_ok=_side_condition(k, L, M_sigma) if L > 0 else False,
    )


def sparsity_level(q: int, epsilon: float) -> float:
    return (1.0 + epsilon) * q + epsilon


@dataclass
class TheoryReport:
    inputs: TheoryInputs
    lam: float
    m0: int
    r_n: float
    s: float
    max_selected: int  # floor(s): the event ||theta||_0 <= s in integer form
    delta_theory: float
    j0: int | None  # None when ln(2 sqrt(M)) == ln(c)
    condition_c_ok: bool
    c_required: float
    k_range: tuple | None
    inequality_ok: dict = field(default_factory=dict)
    sparsity_tail_bound: float | None = None
    risk_tail_bound: float | None = None
    risk_threshold: float = 0.0
    mean_risk_bound: float | None = None

    @property
    def j0_defined(self) -> bool:
        return self.j0 is not None

    @property
    def conditions_hold(self) -> bool:
        return self.condition_c_ok and self.j0_defined and all(self.inequality_ok.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["inputs"] = asdict(self.inputs)
        d["k_range"] = list(self.k_range) if self.k_range else None
        d["inequality_ok"] = {str(k): v for k, v in self.inequality_ok.items()}
        d["conditions_hold"] = self.conditions_hold
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "TheoryReport":
        d = dict(d)
        d.pop("conditions_hold", None)
        d["inputs"] = TheoryInputs(**d["inputs"])
        d["k_range"] = tuple(d["k_range"]) if d["k_range"] else None
        d["inequality_ok"] = {int(k): v for k, v in d["inequality_ok"].items()}
        return cls(**d)

    def to_text(self) -> str:
        i = self.inputs
        rows = [
            ("q, epsilon, sigma", f"{i.q}, {i.epsilon:g}, {i.sigma:g}"),
            ("M_sigma (assumed)", f"{i.M_sigma:g}"),
            ("c, n, p", f"{i.c:g}, {i.n}, {i.p}"),
            ("lambda", f"{self.lam:.12g}"),
            ("m0", str(self.m0)),
            ("r_n", f"{self.r_n:.12g}"),
            ("s", f"{self.s:.12g}"),
            ("max selected (floor s)", str(self.max_selected)),
            ("delta = 2 sqrt(M)/c", f"{self.delta_theory:.12g}"),
            ("j0", "undefined" if self.j0 is None else str(self.j0)),
            ("c >= c_required", f"{self.condition_c_ok} (c_required = {self.c_required:.6g})"),
            ("k range checked", "-" if self.k_range is None else f"{self.k_range[0]}..{self.k_range[1]}"),
            ("side inequality on range", str(all(self.inequality_ok.values())) if self.inequality_ok else "-"),
            ("P(||theta||_0 > s) <=", _g(self.sparsity_tail_bound)),
            ("P(U_n > 3 lambda s) <=", _g(self.risk_tail_bound)),
            ("3 lambda s", f"{self.risk_threshold:.12g}"),
            ("E[U_n] <=", _g(self.mean_risk_bound)),
        ]
        w = max(len(a) for a, _ in rows)
        text = "\n".join(f"{a.ljust(w)}  {b}" for a, b in rows)
        note = "" if self.conditions_hold else "\nconditions not met: bounds are informational only"
        return text + note + "\n"


def _g(v):
    return "undefined" if v is None else f"{v:.12g}"


def theory_report(inputs: TheoryInputs) -> TheoryReport:
    q, eps, n, p = inputs.q, inputs.epsilon, inputs.n, inputs.p
    L = math.log(max(p, n))
    lam = lambda_condition2(inputs.c, n, p)
    inv = math.floor(1.0 / lam) if lam > 0 else p
    m0 = max(q, min(p, inv))
    r_n = q * L
    s = sparsity_level(q, eps)
    two_root_m = 2.0 * math.sqrt(inputs.M_sigma)
    c_required = two_root_m * (1.0 + eps) / eps
    denom = abs(math.log(two_root_m) - math.log(inputs.c))
    j0 = math.ceil((math.log(m0) - math.log(eps)) / denom) if denom > 0 else None
    report = TheoryReport(
        inputs=inputs,
        lam=lam,
        m0=m0,
        r_n=r_n,
        s=s,
        max_selected=math.floor(s),
        delta_theory=two_root_m / inputs.c,
        j0=j0,
        condition_c_ok=inputs.c >= c_required,
        c_required=c_required,
        k_range=None,
        risk_threshold=3.0 * lam * s,
    )
    if j0 is None:
        return report
    upper = min(max(m0, math.floor(s), (j0 - 1) * q + math.isqrt(m0)), p)
    report.k_range = (q, upper)
    report.inequality_ok = {k: _side_condition(k, L, inputs.M_sigma) for k in range(q, upper + 1)}
    tail = math.exp(-inputs.sigma * r_n)
    report.sparsity_tail_bound = j0 * tail
    report.risk_tail_bound = (1 + j0) * tail
    report.mean_risk_bound = (1 + j0) * tail + report.risk_threshold
    return report


@dataclass
class EmpiricalCheck:
    reps: int
    freq_sparsity_exceeds: float
    freq_risk_exceeds: float
    mean_excess_risk: float
    sparsity_tail_bound: float | None
    risk_tail_bound: float | None
    mean_risk_bound: float | None
    binding: bool  # False when the theorem's conditions fail for these inputs

    def to_dict(self) -> dict:
        return asdict(self)


def empirical_check(report: TheoryReport, l0_norms, excess_risks) -> EmpiricalCheck:
    """Compare Monte Carlo frequencies with the bounds.

    ``excess_risks`` are validation-sample estimates of the population excess
    risk, so agreement is only up to Monte Carlo noise.
    """
    l0 = np.asarray(l0_norms, dtype=float)
    u = np.asarray(excess_risks, dtype=float)
    if len(l0) == 0 or len(l0) != len(u):
        raise ValueError("need equally many nonzero counts and excess risks")
    return EmpiricalCheck(
        reps=len(l0),
        freq_sparsity_exceeds=float(np.mean(l0 > report.s)),
        freq_risk_exceeds=float(np.mean(u > report.risk_threshold)),
        mean_excess_risk=float(np.mean(u)),
        sparsity_tail_bound=report.sparsity_tail_bound,
        risk_tail_bound=report.risk_tail_bound,
        mean_risk_bound=report.mean_risk_bound,
        binding=report.conditions_hold,
    )
