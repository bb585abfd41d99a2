"""Export/import of :class:`MilpProblem` in a subset of the CPLEX LP format.

Grammar written and accepted here::

    \\ comment lines
    Minimize
     obj: [+|-] coef name ... [+|-] constant
    Subject To
     c0: coef name + coef name ... (<=|>=|=) rhs
    Bounds
     lo <= name <= hi        (also ``-inf``/``+inf``, ``name free``)
    Binaries
     name name ...
    End

Every term carries an explicit coefficient; one constraint per line.
"""

from __future__ import annotations

import re

import numpy as np

from .model import MilpProblem

_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\[\]]*$")


def _fmt(v: float) -> str:
    return repr(float(v))


def _terms(row: dict, names: list[str]) -> str:
    parts = []
    for j in sorted(row):
        a = row[j]
        sign = "-" if a < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(a))} {names[j]}")
    if not parts:
        return f"+ 0.0 {names[0]}"
    return " ".join(parts)


def write_lp(problem: MilpProblem, path=None) -> str:
    names = problem.names()
    for nm in names:
        if not _NAME.match(nm):
            raise ValueError(f"variable name {nm!r} is not LP-format safe")
    lines = ["\\ written by l0erm", "Minimize"]
    obj = {j: c for j, c in enumerate(problem.objective) if c != 0.0}
    objline = " obj: " + _terms(obj, names)
    if problem.objective_offset:
        off = problem.objective_offset
        objline += f" {'-' if off < 0 else '+'} {_fmt(abs(off))}"
    lines.append(objline)
    lines.append("Subject To")
    for i, (row, sense, rhs) in enumerate(problem.constraints):
        lines.append(f" c{i}: {_terms(row, names)} {sense} {_fmt(rhs)}")
    lines.append("Bounds")
    for j, nm in enumerate(names):
        lo, hi = problem.var_lower[j], problem.var_upper[j]
        if np.isinf(lo) and np.isinf(hi):
            lines.append(f" {nm} free")
        else:
            lo_s = "-inf" if np.isinf(lo) else _fmt(lo)
            hi_s = "+inf" if np.isinf(hi) else _fmt(hi)
            lines.append(f" {lo_s} <= {nm} <= {hi_s}")
    binaries = [names[j] for j in np.flatnonzero(problem.is_binary)]
    if binaries:
        lines.append("Binaries")
        for k in range(0, len(binaries), 10):
            lines.append(" " + " ".join(binaries[k : k + 10]))
    lines.append("End")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


_TERM = re.compile(r"([+-])\s*([0-9eE.+\-infa]+)\s+([A-Za-z_][A-Za-z0-9_.\[\]]*)")


def _parse_expr(expr: str):
    terms = []
    pos = 0
    expr = expr.strip()
    const = 0.0
    for m in _TERM.finditer(expr):
        if expr[pos : m.start()].strip():
            raise ValueError(f"cannot parse LP expression near {expr[pos:m.start()]!r}")
        coef = float(m.group(2)) * (-1.0 if m.group(1) == "-" else 1.0)
        terms.append((m.group(3), coef))
        pos = m.end()
    rest = expr[pos:].strip()
    if rest:
        sign = -1.0 if rest.startswith("-") else 1.0
        const = sign * float(rest.lstrip("+-").strip())
    return terms, const


def read_lp(text: str) -> MilpProblem:
    """Parse text produced by :func:`write_lp`."""
    section = None
    obj_terms, offset = [], 0.0
    rows = []
    bounds = {}
    binaries = []
    seen: list[str] = []
    bound_order: list[str] = []

    def see(nm):
        if nm not in seen:
            seen.append(nm)

    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "bounds", "binaries", "end"):
            section = low
            continue
        if section == "minimize":
            body = line.split(":", 1)[1]
            obj_terms, offset = _parse_expr(body)
            for nm, _ in obj_terms:
                see(nm)
        elif section == "subject to":
            body = line.split(":", 1)[1]
            m = re.search(r"(<=|>=|=)\s*(\S+)\s*$", body)
            if m is None:
                raise ValueError(f"constraint without sense: {line!r}")
            terms, _ = _parse_expr(body[: m.start()])
            for nm, _c in terms:
                see(nm)
            rows.append((terms, m.group(1), float(m.group(2))))
        elif section == "bounds":
            if line.endswith(" free"):
                nm = line[:-5].strip()
                bound_order.append(nm)
                bounds[nm] = (-np.inf, np.inf)
            else:
                lo_s, nm, hi_s = [s.strip() for s in line.split("<=")]
                bound_order.append(nm)
                bounds[nm] = (float(lo_s), float(hi_s))
        elif section == "binaries":
            for nm in line.split():
                see(nm)
                binaries.append(nm)
    order = bound_order + [nm for nm in seen if nm not in bounds]
    index = {nm: j for j, nm in enumerate(order)}
    c = np.zeros(len(order))
    for nm, coef in obj_terms:
        c[index[nm]] += coef
    lo = np.array([bounds.get(nm, (0.0, np.inf))[0] for nm in order])
    hi = np.array([bounds.get(nm, (0.0, np.inf))[1] for nm in order])
    is_bin = np.array([nm in set(binaries) for nm in order])
    prob = MilpProblem(c, lo, hi, is_bin, var_names=list(order), objective_offset=offset)
    for terms, sense, rhs in rows:
        row: dict = {}
        for nm, coef in terms:
            row[index[nm]] = row.get(index[nm], 0.0) + coef
        prob.add_constraint(row, sense, rhs)
    return prob
