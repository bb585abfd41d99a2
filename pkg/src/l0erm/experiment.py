"""Monte Carlo harness: generate, fit every method, score, aggregate.

Each repetition draws its training, validation and lasso-CV randomness from
separate counter-based streams keyed by ``(seed, rep, purpose)``, so the
methods never perturb each other and repetitions can run in any order or
in parallel.
"""

from __future__ import annotations

import configparser
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dgp
from .core import SELECTION_TOL, Dataset, LinearClassifier, ParameterBox, selected_indices
from .erm import FitError, fit_intercept_only, fit_penalized
from .lasso import cross_validate, normalize_to_classifier
from .metrics import (
    RepetitionRecord,
    aggregate,
    expected_risk,
    misclassification_risk,
    records_to_csv,
    render_table,
    reports_to_csv,
)
from .milp import MilpLimits
from .tuning import TuningSpec

log = logging.getLogger(__name__)

METHODS = ("l0erm", "lasso_opt", "lasso_1se", "intercept_only")
WORKERS_ENV = "L0ERM_WORKERS"


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    variant: str = "i"
    p: int = 10
    n_train: int = 100
    n_valid: int = 5000
    repetitions: int = 100
    seed: int = 0
    time_limit: float = 60.0
    node_limit: int | None = None
    gap_tol: float = 0.0
    box_bound: float = 10.0
    tuning: TuningSpec = field(default_factory=TuningSpec)
    methods: tuple = ("l0erm", "lasso_opt", "lasso_1se")
    cv_folds: int = 10
    cv_stratified: bool = False
    risk_mode: str = "empirical"

    def __post_init__(self):
        dgp.DgpSpec.make(self.variant, self.p)
        for name in ("n_train", "n_valid", "repetitions"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not self.methods:
            raise ValueError("at least one method is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")
        if self.box_bound <= 0:
            raise ValueError("box_bound must be positive")
        if self.risk_mode not in ("empirical", "analytic"):
            raise ValueError("risk_mode must be 'empirical' or 'analytic'")

    @property
    def spec(self) -> dgp.DgpSpec:
        return dgp.DgpSpec.make(self.variant, self.p)

    @property
    def limits(self) -> MilpLimits:
        return MilpLimits(time_limit=self.time_limit, node_limit=self.node_limit, gap_tol=self.gap_tol)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d


# ---------------------------------------------------------------- config files

def _get(sec, key, conv, default):
    if sec is None or key not in sec:
        return default
    raw = sec[key].strip()
    if raw.lower() in ("", "none"):
        return None
    return conv(raw)


def _bool(raw: str) -> bool:
    v = raw.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def load_configs(path) -> list[ExperimentConfig]:
    """Read an INI file; a comma-separated ``p`` yields one config per value."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    unknown = set(parser.sections()) - {"experiment", "dgp", "solver", "tuning", "lasso"}
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    ex, dg, so, tu, la = (parser[s] if parser.has_section(s) else None
                          for s in ("experiment", "dgp", "solver", "tuning", "lasso"))
    base = ExperimentConfig()
    ps = _get(dg, "p", lambda s: [int(x) for x in s.split(",")], [base.p])
    mode = _get(tu, "mode", str, "heuristic")
    constant = _get(tu, "constant", float, None)
    methods = _get(ex, "methods", lambda s: tuple(m.strip() for m in s.split(",") if m.strip()), base.methods)
    common = dict(
        name=_get(ex, "name", str, Path(path).stem),
        variant=_get(dg, "variant", str, base.variant),
        n_train=_get(dg, "n_train", int, base.n_train),
        n_valid=_get(dg, "n_valid", int, base.n_valid),
        repetitions=_get(ex, "repetitions", int, base.repetitions),
        seed=_get(ex, "seed", int, base.seed),
        methods=methods,
        risk_mode=_get(ex, "risk_mode", str, base.risk_mode),
        time_limit=_get(so, "time_limit", float, base.time_limit),
        node_limit=_get(so, "node_limit", int, None),
        gap_tol=_get(so, "gap_tol", float, base.gap_tol),
        box_bound=_get(so, "box_bound", float, base.box_bound),
        tuning=TuningSpec(mode, constant),
        cv_folds=_get(la, "folds", int, base.cv_folds),
        cv_stratified=_get(la, "stratified", _bool, base.cv_stratified),
    )
    return [ExperimentConfig(p=p, **common) for p in ps]


# ---------------------------------------------------------------- one repetition

@dataclass
class MethodOutcome:
    record: RepetitionRecord | None
    fit: dict  # JSON-ready details
    error: str | None = None


def _score(method, rep, train, valid, pred_in, pred_out, bayes, config, selected, **kw):
    if config.risk_mode == "analytic":
        out_risk = expected_risk(valid.eta, pred_out)
        bayes_out = expected_risk(valid.eta, bayes[1])
    else:
        out_risk = misclassification_risk(valid.dataset, pred_out)
        bayes_out = misclassification_risk(valid.dataset, bayes[1])
    return RepetitionRecord(
        method=method,
        rep=rep,
        in_risk=misclassification_risk(train.dataset, pred_in),
        out_risk=out_risk,
        bayes_in_risk=misclassification_risk(train.dataset, bayes[0]),
        bayes_out_risk=bayes_out,
        selected=selected,
        **kw,
    )


def _predict(clf: LinearClassifier, ds: Dataset) -> np.ndarray:
    return ds.scores(clf.theta) >= 0


def run_repetition(config: ExperimentConfig, rep: int) -> list[MethodOutcome]:
    spec = config.spec
    train = dgp.generate(spec, config.n_train, dgp.rng_stream(config.seed, rep, dgp.PURPOSE_TRAIN))
    valid = dgp.generate(spec, config.n_valid, dgp.rng_stream(config.seed, rep, dgp.PURPOSE_VALID))
    bayes = dgp.bayes_classifier(spec)
    bayes_pred = (_predict(bayes, train.dataset), _predict(bayes, valid.dataset))
    box = ParameterBox.symmetric(spec.p, config.box_bound)
    out = []

    if "l0erm" in config.methods:
        t0 = time.perf_counter()
        lam, tuning = config.tuning.resolve(train.dataset)
        try:
            res = fit_penalized(train.dataset, box, lam, limits=config.limits)
        except FitError as exc:
            out.append(MethodOutcome(None, {"method": "l0erm", "rep": rep, "tuning": tuning}, str(exc)))
        else:
            clf = LinearClassifier(res.theta_hat)
            rec = _score("l0erm", rep, train, valid, _predict(clf, train.dataset), _predict(clf, valid.dataset),
                         bayes_pred, config, res.selected, runtime=time.perf_counter() - t0,
                         solver_gap=res.solver.relative_gap, status=res.status)
            fit = {"method": "l0erm", "rep": rep, "tuning": tuning, **res.to_dict()}
            out.append(MethodOutcome(rec, fit))

    lasso_methods = [m for m in ("lasso_opt", "lasso_1se") if m in config.methods]
    if lasso_methods:
        t0 = time.perf_counter()
        cv = cross_validate(train.dataset, folds=config.cv_folds, seed=dgp.rng_stream(config.seed, rep, dgp.PURPOSE_LASSO_CV),
                            stratified=config.cv_stratified)
        elapsed = time.perf_counter() - t0
        for method in lasso_methods:
            k = cv.index_opt if method == "lasso_opt" else cv.index_1se
            norm = normalize_to_classifier(cv.path, k)
            if norm.degenerate:
                pin = cv.path.linear_index(k, train.dataset) >= 0
                pout = cv.path.linear_index(k, valid.dataset) >= 0
            else:
                pin, pout = _predict(norm.classifier, train.dataset), _predict(norm.classifier, valid.dataset)
            sel = selected_indices(norm.classifier.theta, SELECTION_TOL)
            rec = _score(method, rep, train, valid, pin, pout, bayes_pred, config, sel, runtime=elapsed,
                         status="degenerate" if norm.degenerate else "ok",
                         extra={"negative_x1": norm.negative_x1})
            fit = {"method": method, "rep": rep, "lambda": float(cv.lambdas[k]),
                   "theta": [float(v) for v in norm.classifier.theta], "selected": sel,
                   "beta_x1": float(cv.path.beta_x1[k]), "degenerate": norm.degenerate,
                   "negative_x1": norm.negative_x1, "cv_risk": float(cv.mean_risk[k])}
            out.append(MethodOutcome(rec, fit))

    if "intercept_only" in config.methods:
        t0 = time.perf_counter()
        h, t_star = fit_intercept_only(train.dataset, (-config.box_bound, config.box_bound))
        rec = _score("intercept_only", rep, train, valid, train.dataset.x1 + t_star >= 0,
                     valid.dataset.x1 + t_star >= 0, bayes_pred, config, None,
                     runtime=time.perf_counter() - t0)
        out.append(MethodOutcome(rec, {"method": "intercept_only", "rep": rep, "h": h, "t_star": t_star}))
    return out


# ---------------------------------------------------------------- whole experiment

@dataclass
class ExperimentOutcome:
    config: ExperimentConfig
    outcomes: dict  # method -> list of MethodOutcome ordered by rep
    elapsed: float

    def reports(self):
        reps = []
        for m in self.config.methods:
            recs = [o.record for o in self.outcomes[m] if o.record is not None]
            failures = sum(o.record is None for o in self.outcomes[m])
            if recs:
                reps.append(aggregate(recs, failures))
        return reps

    def records(self):
        return [o.record for m in self.config.methods for o in self.outcomes[m] if o.record is not None]


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        w = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, w)


def _run_one(args):
    config, rep = args
    return rep, run_repetition(config, rep)


def run_experiment(config: ExperimentConfig, workers: int | None = None, progress=None) -> ExperimentOutcome:
    workers = default_workers() if workers is None else max(1, int(workers))
    t0 = time.perf_counter()
    jobs = [(config, r) for r in range(config.repetitions)]
    results = {}
    if workers == 1:
        for job in jobs:
            rep, res = _run_one(job)
            results[rep] = res
            if progress:
                progress(rep, res)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rep, res in pool.map(_run_one, jobs):
                results[rep] = res
                if progress:
                    progress(rep, res)
    by_method = {m: [] for m in config.methods}
    for rep in sorted(results):
        for o in results[rep]:
            by_method[o.fit["method"]].append(o)
    return ExperimentOutcome(config, by_method, time.perf_counter() - t0)


def write_outputs(outcome: ExperimentOutcome, outdir) -> dict:
    """Write report/records CSVs (timing-free), the text table, fits and timings.

    Returns the written paths by role.
    """
    cfg = outcome.config
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = f"{cfg.name}_p{cfg.p}"
    reports = outcome.reports()
    title = f"{cfg.name}: DGP({cfg.variant}), p={cfg.p}, n={cfg.n_train}, validation {cfg.n_valid}, {cfg.repetitions} reps"
    paths = {
        "report_csv": outdir / f"{stem}_report.csv",
        "records_csv": outdir / f"{stem}_reps.csv",
        "table": outdir / f"{stem}_table.txt",
        "fits": outdir / f"{stem}_fits.jsonl",
        "timing": outdir / f"{stem}_timing.csv",
        "config": outdir / f"{stem}_config.json",
    }
    paths["report_csv"].write_text(reports_to_csv(reports))
    paths["records_csv"].write_text(records_to_csv(outcome.records()))
    paths["table"].write_text(render_table(reports, title))
    with open(paths["fits"], "w") as fh:
        for m in cfg.methods:
            for o in outcome.outcomes[m]:
                row = dict(o.fit)
                if o.error:
                    row["error"] = o.error
                fh.write(json.dumps(row, default=_json_default) + "\n")
    with open(paths["timing"], "w") as fh:
        fh.write("method,rep,runtime,solver_gap,status\n")
        for m in cfg.methods:
            for o in outcome.outcomes[m]:
                r = o.record
                if r is None:
                    fh.write(f"{m},{o.fit['rep']},,,failed\n")
                else:
                    gap = "" if math.isnan(r.solver_gap) else repr(r.solver_gap)
                    fh.write(f"{m},{r.rep},{r.runtime:.3f},{gap},{r.status}\n")
    paths["config"].write_text(json.dumps({"config": cfg.to_dict(), "dgp": cfg.spec.to_dict()}, indent=2) + "\n")
    return paths


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")


def with_overrides(config: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
