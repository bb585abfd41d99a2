import json

import pytest

from l0erm import cli
from l0erm.dgp import DgpSpec
from l0erm.erm import FitError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def data(tmp_path, capsys):
    d = tmp_path / "data"
    code, _, _ = run(capsys, "simulate", "--reps", "2", "--p", "4", "--n-train", "40", "--n-valid", "100",
                     "--seed", "5", "--out", str(d))
    assert code == 0
    return d


def test_simulate_outputs(data, tmp_path, capsys):
    names = sorted(f.name for f in data.iterdir())
    assert names == ["manifest.json", "rep000_train.csv", "rep000_valid.csv", "rep001_train.csv", "rep001_valid.csv"]
    manifest = json.loads((data / "manifest.json").read_text())
    assert manifest["dgp"]["theta_star"] == DgpSpec.make("i", 4).theta_star.tolist()
    again = tmp_path / "again"
    run(capsys, "simulate", "--reps", "2", "--p", "4", "--n-train", "40", "--n-valid", "100",
        "--seed", "5", "--out", str(again))
    for f in data.iterdir():
        assert (again / f.name).read_bytes() == f.read_bytes()


def test_fit_methods(data, capsys):
    train = str(data / "rep000_train.csv")
    code, out, _ = run(capsys, "fit", train, "--method", "intercept_only")
    assert code == 0 and set(json.loads(out)) == {"method", "h", "t_star"}
    code, out, _ = run(capsys, "fit", train, "--lambda", "0.05", "--node-limit", "50")
    row = json.loads(out)
    assert row["tuning"] == {"mode": "fixed", "lambda": 0.05} and row["lambda"] == 0.05
    code, out, _ = run(capsys, "fit", train, "--method", "lasso", "--folds", "5")
    rows = [json.loads(x) for x in out.splitlines()]
    assert [r["method"] for r in rows] == ["lasso_opt", "lasso_1se"]
    assert rows[1]["lambda"] >= rows[0]["lambda"]


def test_fit_appends_to_file(data, tmp_path, capsys):
    out = tmp_path / "fits.jsonl"
    for _ in range(2):
        run(capsys, "fit", str(data / "rep000_train.csv"), "--method", "intercept_only", "--out", str(out))
    assert len(out.read_text().splitlines()) == 2


def test_fit_condition2_needs_c(data, capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["fit", str(data / "rep000_train.csv"), "--tuning", "condition2"])
    assert info.value.code == 2


def test_solver_failure_exit_code(data, capsys, monkeypatch):
    def boom(*a, **k):
        raise FitError("no incumbent")

    monkeypatch.setattr(cli, "fit_penalized", boom)
    code, _, err = run(capsys, "fit", str(data / "rep000_train.csv"))
    assert code == 3 and "solver failure" in err


def test_io_error_exit_code(tmp_path, capsys):
    code, _, err = run(capsys, "fit", str(tmp_path / "missing.csv"))
    assert code == 4 and "missing.csv" in err


def test_bad_config_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[dgp]\np = 1\n")
    code, _, err = run(capsys, "experiment", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == 2


def test_experiment_command(tmp_path, capsys):
    code, out, _ = run(capsys, "experiment", "--methods", "intercept_only", "--reps", "1", "--p", "3",
                       "--n-valid", "200", "--out", str(tmp_path / "res"))
    assert code == 0 and "out_RR" in out
    assert (tmp_path / "res" / "experiment_p3_report.csv").exists()


def test_theory_requires_m_sigma(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["theory"])
    assert info.value.code == 2
    assert "--M-sigma" in capsys.readouterr().err


def test_theory_json_round_trip(tmp_path, capsys):
    from l0erm.theory import TheoryReport

    out = tmp_path / "t.json"
    code, _, _ = run(capsys, "theory", "--M-sigma", "1", "--format", "json", "--out", str(out))
    d = json.loads(out.read_text())
    rep = TheoryReport.from_dict(d)
    assert json.loads(rep.to_json()) == d


def test_theory_text_and_empirical(capsys):
    code, out, _ = run(capsys, "theory", "--M-sigma", "1", "--p", "4", "--n", "40", "--empirical",
                       "--reps", "2", "--n-valid", "200", "--node-limit", "50", "--format", "json")
    d = json.loads(out)
    assert code == 0 and d["empirical"]["reps"] == 2
    code, out, _ = run(capsys, "theory", "--M-sigma", "1")
    assert "j0" in out and "lambda" in out
