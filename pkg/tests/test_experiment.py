import json

import numpy as np
import pytest

from l0erm.experiment import (
    WORKERS_ENV,
    ExperimentConfig,
    default_workers,
    load_configs,
    run_experiment,
    run_repetition,
    write_outputs,
)
from l0erm.tuning import TuningSpec

QUICK = dict(p=4, n_train=40, n_valid=500, repetitions=2, node_limit=200, cv_folds=5)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(methods=())
    with pytest.raises(ValueError):
        ExperimentConfig(methods=("svm",))
    with pytest.raises(ValueError):
        ExperimentConfig(repetitions=0)
    with pytest.raises(ValueError):
        ExperimentConfig(variant="iii")


def test_load_config_with_p_list(tmp_path):
    path = tmp_path / "t.ini"
    path.write_text("[experiment]\nrepetitions = 3\nmethods = l0erm, intercept_only\n"
                    "[dgp]\nvariant = ii\np = 10, 200\n[solver]\ntime_limit = 5\nnode_limit = none\n"
                    "[tuning]\nmode = condition2\nconstant = 0.5\n")
    cfgs = load_configs(path)
    assert [c.p for c in cfgs] == [10, 200]
    assert cfgs[0].variant == "ii" and cfgs[0].repetitions == 3 and cfgs[0].time_limit == 5.0
    assert cfgs[0].methods == ("l0erm", "intercept_only") and cfgs[0].name == "t"
    assert cfgs[0].tuning == TuningSpec("condition2", 0.5)
    bad = tmp_path / "bad.ini"
    bad.write_text("[oops]\nx = 1\n")
    with pytest.raises(ValueError):
        load_configs(bad)


def test_shipped_configs_parse():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.ini"))
    assert {f.stem for f in files} >= {"table1", "table2", "table1_desk", "table2_desk"}
    full = load_configs(root / "table1.ini")
    assert [c.p for c in full] == [10, 200] and full[0].time_limit == 3600 and full[0].repetitions == 100
    assert load_configs(root / "table2.ini")[0].variant == "ii"


def test_repetition_methods_use_independent_streams():
    base = ExperimentConfig(methods=("l0erm",), **QUICK)
    both = ExperimentConfig(methods=("l0erm", "lasso_opt", "intercept_only"), **QUICK)
    a = run_repetition(base, 1)[0]
    b = [o for o in run_repetition(both, 1) if o.fit["method"] == "l0erm"][0]
    assert a.record.in_risk == b.record.in_risk and a.record.out_risk == b.record.out_risk
    assert a.fit["theta"] == b.fit["theta"]


def test_intercept_only_single_rep(tmp_path):
    cfg = ExperimentConfig(methods=("intercept_only",), **{**QUICK, "repetitions": 1})
    out = run_experiment(cfg, workers=1)
    (rep,) = out.reports()
    assert rep.reps == 1 and not rep.has_selection and rep.out_RR > 0
    paths = write_outputs(out, tmp_path)
    assert "selection measures not defined" in paths["table"].read_text()


def test_outputs_deterministic_and_worker_independent(tmp_path):
    cfg = ExperimentConfig(methods=("l0erm", "lasso_opt", "lasso_1se", "intercept_only"), **QUICK)
    p1 = write_outputs(run_experiment(cfg, workers=1), tmp_path / "a")
    p2 = write_outputs(run_experiment(cfg, workers=2), tmp_path / "b")
    for role in ("report_csv", "records_csv", "table"):
        assert p1[role].read_bytes() == p2[role].read_bytes()
    fits = [json.loads(line) for line in p1["fits"].read_text().splitlines()]
    assert {f["method"] for f in fits} == set(cfg.methods)
    assert len(fits) == 8


def test_analytic_risk_mode():
    cfg = ExperimentConfig(methods=("intercept_only",), risk_mode="analytic", **QUICK)
    rep = run_experiment(cfg, workers=1).reports()[0]
    assert np.isfinite(rep.out_RR)


def test_workers_env(monkeypatch):
    monkeypatch.setenv(WORKERS_ENV, "3")
    assert default_workers() == 3
    monkeypatch.setenv(WORKERS_ENV, "zero")
    with pytest.raises(ValueError):
        default_workers()
    monkeypatch.delenv(WORKERS_ENV)
    assert default_workers() == 1
