"""Command-line entry point: ``l0erm simulate | fit | experiment | theory``.

Exit codes: 0 success, 2 usage error, 3 solver failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dgp
from .core import ParameterBox, read_csv, write_csv
from .erm import FitError, fit_intercept_only, fit_penalized
from .experiment import (
    METHODS,
    WORKERS_ENV,
    ExperimentConfig,
    load_configs,
    run_experiment,
    with_overrides,
    write_outputs,
)
from .lasso import cross_validate, normalize_to_classifier
from .milp import MilpLimits, SolverError
from .theory import TheoryInputs, empirical_check, theory_report
from .tuning import TuningSpec

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("l0erm")


class UsageError(Exception):
    pass


def _tuning_from_args(args) -> TuningSpec:
    if args.lam is not None:
        return TuningSpec("fixed", args.lam)
    if args.tuning == "condition2":
        if args.c is None:
            raise UsageError("--tuning condition2 requires --c")
        return TuningSpec("condition2", args.c)
    return TuningSpec("heuristic", args.v)


# ---------------------------------------------------------------- simulate

def cmd_simulate(args) -> int:
    config = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = config.spec
    files = []
    for rep in range(config.repetitions):
        for purpose, n, tag in ((dgp.PURPOSE_TRAIN, config.n_train, "train"),
                                (dgp.PURPOSE_VALID, config.n_valid, "valid")):
            sample = dgp.generate(spec, n, dgp.rng_stream(config.seed, rep, purpose))
            path = out / f"rep{rep:03d}_{tag}.csv"
            write_csv(sample.dataset, path, extra={"eta": sample.eta})
            files.append(path.name)
    manifest = {"dgp": spec.to_dict(), "seed": config.seed, "n_train": config.n_train,
                "n_valid": config.n_valid, "repetitions": config.repetitions, "files": files}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(files)} files and manifest.json to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- fit

def cmd_fit(args) -> int:
    ds, _ = read_csv(args.dataset)
    box = ParameterBox.symmetric(ds.p, args.box)
    rows = []
    if args.method == "l0erm":
        lam, tuning = _tuning_from_args(args).resolve(ds)
        limits = MilpLimits(time_limit=args.time_limit, node_limit=args.node_limit, gap_tol=args.gap_tol)
        res = fit_penalized(ds, box, lam, limits=limits)
        rows.append({"method": "l0erm", "tuning": tuning, **res.to_dict()})
    elif args.method == "lasso":
        cv = cross_validate(ds, folds=args.folds, seed=args.seed, stratified=args.stratified)
        for name, k in (("lasso_opt", cv.index_opt), ("lasso_1se", cv.index_1se)):
            norm = normalize_to_classifier(cv.path, k)
            rows.append({"method": name, "lambda": float(cv.lambdas[k]),
                         "theta": [float(v) for v in norm.classifier.theta],
                         "selected": [int(j) for j in np.flatnonzero(np.abs(norm.classifier.theta) > 1e-6)],
                         "beta_x1": float(cv.path.beta_x1[k]), "degenerate": norm.degenerate,
                         "negative_x1": norm.negative_x1, "cv_risk": float(cv.mean_risk[k])})
    else:
        h, t_star = fit_intercept_only(ds, (-args.box, args.box))
        rows.append({"method": "intercept_only", "h": h, "t_star": t_star})
    text = "".join(json.dumps(r) + "\n" for r in rows)
    if args.out:
        with open(args.out, "a") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- experiment

def _config_from_args(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        configs = load_configs(args.config)
    else:
        configs = [ExperimentConfig()]
    if getattr(args, "p", None) is not None:
        configs = [with_overrides(c, p=args.p) for c in configs[:1]]
    over = dict(
        variant=getattr(args, "variant", None),
        n_train=getattr(args, "n_train", None),
        n_valid=getattr(args, "n_valid", None),
        repetitions=getattr(args, "reps", None),
        seed=getattr(args, "seed", None),
        time_limit=getattr(args, "time_limit", None),
        node_limit=getattr(args, "node_limit", None),
    )
    if getattr(args, "methods", None):
        over["methods"] = tuple(args.methods.split(","))
    configs = [with_overrides(c, **over) for c in configs]
    if getattr(args, "_all_configs", False):
        return configs
    return configs[0]


def cmd_experiment(args) -> int:
    args._all_configs = True
    configs = _config_from_args(args)
    for cfg in configs:
        def progress(rep, res, cfg=cfg):
            log.info("%s p=%d rep %d done", cfg.name, cfg.p, rep)
        outcome = run_experiment(cfg, workers=args.workers, progress=progress)
        paths = write_outputs(outcome, args.out)
        sys.stdout.write(paths["table"].read_text())
        print(f"outputs in {args.out} ({outcome.elapsed:.1f}s)")
        failed = sum(o.record is None for outs in outcome.outcomes.values() for o in outs)
        if failed:
            print(f"{failed} fits failed; see {paths['fits'].name}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------- theory

def cmd_theory(args) -> int:
    if args.M_sigma is None:
        raise UsageError("--M-sigma is required: the bound constant has no closed form and must be supplied")
    inputs = TheoryInputs(q=args.q, epsilon=args.epsilon, sigma=args.sigma, M_sigma=args.M_sigma,
                          c=args.c, n=args.n, p=args.p)
    report = theory_report(inputs)
    payload = report.to_dict()
    if args.empirical:
        cfg = ExperimentConfig(name="theory_check", variant=args.variant, p=args.p, n_train=args.n,
                               n_valid=args.n_valid, repetitions=args.reps, seed=args.seed,
                               time_limit=args.time_limit, node_limit=args.node_limit,
                               tuning=TuningSpec("fixed", report.lam), methods=("l0erm",))
        outcome = run_experiment(cfg, workers=args.workers)
        recs = [o for o in outcome.outcomes["l0erm"] if o.record is not None]
        if not recs:
            raise FitError("no repetition produced a classifier")
        l0 = [len(o.record.selected) for o in recs]
        excess = [o.record.out_risk - o.record.bayes_out_risk for o in recs]
        payload["empirical"] = empirical_check(report, l0, excess).to_dict()
    if args.format == "json":
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        text = report.to_text()
        if "empirical" in payload:
            e = payload["empirical"]
            text += (f"empirical ({e['reps']} reps): freq(||theta||_0 > s) = {e['freq_sparsity_exceeds']:.3f}, "
                     f"freq(U_n > 3 lambda s) = {e['freq_risk_exceeds']:.3f}, mean U_n = {e['mean_excess_risk']:.4f}\n")
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _add_design(p, reps_default=None):
    p.add_argument("--config", help="INI experiment config (see configs/)")
    p.add_argument("--variant", choices=["i", "ii"], help="DGP variant")
    p.add_argument("--p", type=_positive_int, help="number of selectable columns")
    p.add_argument("--n-train", type=_positive_int)
    p.add_argument("--n-valid", type=_positive_int)
    p.add_argument("--reps", type=_positive_int, default=reps_default, help="repetitions")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="l0erm", description="l0-penalized 0-1 loss classification")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write train/validation CSVs and a manifest")
    _add_design(s)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit one method on a dataset CSV")
    f.add_argument("dataset")
    f.add_argument("--method", choices=["l0erm", "lasso", "intercept_only"], default="l0erm")
    f.add_argument("--lambda", dest="lam", type=float, help="explicit penalty, bypasses tuning")
    f.add_argument("--tuning", choices=["heuristic", "condition2"], default="heuristic")
    f.add_argument("--v", type=float, help="heuristic constant (default: h(1-h) from the data)")
    f.add_argument("--c", type=float, help="rate constant for --tuning condition2")
    f.add_argument("--time-limit", type=float, default=60.0)
    f.add_argument("--node-limit", type=int)
    f.add_argument("--gap-tol", type=float, default=0.0)
    f.add_argument("--box", type=float, default=10.0, help="coefficient bound B for the box [-B, B]")
    f.add_argument("--folds", type=_positive_int, default=10)
    f.add_argument("--stratified", action="store_true")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", help="append JSON lines here instead of stdout")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("experiment", help="Monte Carlo comparison of the methods")
    _add_design(e)
    e.add_argument("--methods", help=f"comma list from {','.join(METHODS)}")
    e.add_argument("--time-limit", type=float, help="MILP seconds per fit")
    e.add_argument("--node-limit", type=int)
    e.add_argument("--workers", type=_positive_int, help=f"process pool size (env {WORKERS_ENV})")
    e.add_argument("--out", default="results")
    e.set_defaults(func=cmd_experiment)

    t = sub.add_parser("theory", help="sparsity and excess-risk bound report")
    t.add_argument("--q", type=_positive_int, default=1)
    t.add_argument("--epsilon", type=float, default=0.5)
    t.add_argument("--sigma", type=float, default=1.0)
    t.add_argument("--M-sigma", dest="M_sigma", type=float, help="bound constant (required)")
    t.add_argument("--c", type=float, default=8.0)
    t.add_argument("--n", type=_positive_int, default=100)
    t.add_argument("--p", type=_positive_int, default=200)
    t.add_argument("--format", choices=["text", "json"], default="text")
    t.add_argument("--out")
    t.add_argument("--empirical", action="store_true", help="attach Monte Carlo frequencies")
    t.add_argument("--variant", choices=["i", "ii"], default="i")
    t.add_argument("--reps", type=_positive_int, default=20)
    t.add_argument("--n-valid", type=_positive_int, default=5000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--time-limit", type=float, default=60.0)
    t.add_argument("--node-limit", type=int)
    t.add_argument("--workers", type=_positive_int)
    t.set_defaults(func=cmd_theory)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with 2
    except (ValueError, configparser.Error) as exc:
        print(f"l0erm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FitError, SolverError) as exc:
        print(f"l0erm: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        where = f" ({exc.filename})" if getattr(exc, "filename", None) else ""
        print(f"l0erm: I/O error{where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
