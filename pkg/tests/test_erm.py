import itertools
import json

import numpy as np
import pytest
from oracles import constrained_optimum, min_errors_on_support, penalized_optimum, random_instance

from l0erm.core import Dataset, ParameterBox, empirical_risk
from l0erm.erm import (
    FitError,
    big_m,
    build_penalized_milp,
    coordinate_polish,
    fit_constrained,
    fit_intercept_only,
    fit_penalized,
)
from l0erm.milp import MilpLimits, solve_lp

BOX3 = ParameterBox.symmetric(3)


def test_big_m_closed_form():
    ds = Dataset([1], [1.0], [[2.0, -3.0]])
    np.testing.assert_allclose(big_m(ds, ParameterBox.symmetric(2)), [51.0])
    zero = Dataset([0, 1], [-2.5, 0.5], np.zeros((2, 2)))
    np.testing.assert_allclose(big_m(zero, ParameterBox.symmetric(2)), [2.5, 0.5])


def test_big_m_matches_corner_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = int(rng.integers(1, 4))
        ds = Dataset(rng.integers(0, 2, 5), rng.normal(size=5), rng.normal(size=(5, p)))
        lo = -rng.uniform(0, 5, p)
        box = ParameterBox(lo, lo + rng.uniform(0, 10, p))
        corners = np.array(list(itertools.product(*zip(box.lower, box.upper))))
        scores = ds.x1[:, None] + ds.xt @ corners.T
        np.testing.assert_allclose(big_m(ds, box), np.abs(scores).max(axis=1), rtol=1e-12)


def test_milp_shape_for_single_sample():
    ds = Dataset([1], [0.3], [[1.0]])
    prob = build_penalized_milp(ds, ParameterBox.symmetric(1), 0.1)
    assert prob.num_vars == 3 and prob.num_constraints == 4
    assert prob.is_binary.tolist() == [False, True, True]


def test_lambda_zero_has_no_penalty_terms():
    ds = random_instance(np.random.default_rng(1), 6, 2)
    prob = build_penalized_milp(ds, ParameterBox.symmetric(2), 0.0)
    assert np.all(prob.objective[ds.n + 2:] == 0.0)


def test_degenerate_box_rejected():
    ds = Dataset([1], [0.3], [[1.0]])
    with pytest.raises(ValueError):
        build_penalized_milp(ds, ParameterBox([1.0], [1.0]), 0.1)


def test_relaxation_bounds_the_oracle():
    rng = np.random.default_rng(2)
    for _ in range(10):
        ds = random_instance(rng, 8, 2)
        box = ParameterBox.symmetric(2)
        prob = build_penalized_milp(ds, box, 0.05)
        assert solve_lp(prob).objective <= penalized_optimum(ds, box, 0.05) + 1e-9


def test_separable_toy_reaches_zero_risk():
    xt = np.array([[-1.0], [-0.5], [0.0], [1.0], [2.0], [3.0]])
    ds = Dataset([1, 1, 1, 1, 0, 0], np.ones(6), xt)
    res = fit_penalized(ds, ParameterBox.symmetric(1), 0.01)
    assert res.risk_recomputed == 0.0
    assert res.selected == [0]
    assert res.status == "optimal"


def test_large_lambda_selects_nothing():
    ds = random_instance(np.random.default_rng(3), 10, 3)
    res = fit_penalized(ds, BOX3, 1.0)
    assert res.selected == []
    assert res.risk_recomputed == empirical_risk(ds, np.zeros(3))


@pytest.mark.parametrize("seed", range(15))
def test_penalized_fit_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    n, p = int(rng.integers(4, 11)), int(rng.integers(1, 4))
    ds = random_instance(rng, n, p)
    box = ParameterBox.symmetric(p)
    for lam in (0.0, 0.05, 0.2):
        res = fit_penalized(ds, box, lam)
        oracle = penalized_optimum(ds, box, lam)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(oracle, abs=1e-9)
        assert res.risk_recomputed + lam * len(res.selected) == pytest.approx(oracle, abs=1e-9)
        assert lam * len(res.selected) <= 1.0
        assert box.contains(res.theta_hat)


def test_heuristic_does_not_change_optimum():
    rng = np.random.default_rng(11)
    ds = random_instance(rng, 12, 3)
    a = fit_penalized(ds, BOX3, 0.05, use_heuristic=True)
    b = fit_penalized(ds, BOX3, 0.05, use_heuristic=False)
    assert a.objective == pytest.approx(b.objective, abs=1e-12)


def test_solution_satisfies_indicator_logic():
    rng = np.random.default_rng(4)
    ds = random_instance(rng, 12, 3)
    res = fit_penalized(ds, BOX3, 0.05)
    x = res.solver.incumbent
    n, p = ds.n, ds.p
    theta, d, e = x[:p], np.round(x[p:p + n]), np.round(x[p + n:])
    M = big_m(ds, BOX3)
    score = ds.scores(theta)
    assert np.all(score[d == 1] >= -1e-6 * M[d == 1])
    assert np.all(score[d == 0] <= 1e-6 * (M[d == 0] + 1e-6))
    assert np.all(np.abs(theta[e == 0]) <= 1e-9)


def test_objective_nondecreasing_in_lambda():
    ds = random_instance(np.random.default_rng(5), 12, 3)
    objs = [fit_penalized(ds, BOX3, lam).objective for lam in (0.0, 0.02, 0.05, 0.1, 0.3)]
    assert all(a <= b + 1e-12 for a, b in zip(objs, objs[1:]))


def test_constrained_fit_matches_oracle_and_is_monotone():
    ds = random_instance(np.random.default_rng(6), 10, 3)
    risks = []
    for m in range(4):
        res = fit_constrained(ds, BOX3, m)
        assert len(res.selected) <= m
        assert res.risk_recomputed == pytest.approx(constrained_optimum(ds, BOX3, m), abs=1e-12)
        risks.append(res.risk_recomputed)
    assert risks[0] == empirical_risk(ds, np.zeros(3))
    assert all(a >= b for a, b in zip(risks, risks[1:]))
    assert risks[-1] == pytest.approx(min_errors_on_support(ds, BOX3, range(3)) / ds.n)
    with pytest.raises(ValueError):
        fit_constrained(ds, BOX3, 4)


def test_tie_on_zero_score_is_reported():
    # score is identically x1 = 0, so the rule predicts 1 while the label is 0
    ds = Dataset([0], [0.0], [[0.0]])
    res = fit_penalized(ds, ParameterBox.symmetric(1), 0.0)
    assert res.risk_recomputed == 1.0
    assert res.risk_milp == 0.0
    assert res.boundary_discrepancy == 1.0
    assert not res.repaired


def test_tie_is_repaired_when_a_coefficient_can_break_it():
    ds = Dataset([0, 1], [0.0, 1.0], [[1.0], [0.0]])
    res = fit_penalized(ds, ParameterBox.symmetric(1), 0.0)
    assert res.risk_recomputed == 0.0
    assert res.boundary_discrepancy == 0.0


def test_fit_error_when_no_incumbent():
    ds = random_instance(np.random.default_rng(8), 10, 2)
    with pytest.raises(FitError) as info:
        fit_penalized(ds, ParameterBox.symmetric(2), 0.1, limits=MilpLimits(time_limit=1e-9), use_heuristic=False)
    assert info.value.result is not None


def test_fit_result_json():
    ds = random_instance(np.random.default_rng(9), 8, 2)
    res = fit_penalized(ds, ParameterBox.symmetric(2), 0.05)
    d = json.loads(res.to_json())
    assert set(d) >= {"theta", "selected", "risk_milp", "risk_recomputed", "boundary_discrepancy", "solver"}
    assert set(d["solver"]) == {"status", "objective", "best_bound", "gap", "nodes", "time"}


def test_coordinate_polish_never_worsens():
    rng = np.random.default_rng(10)
    ds = random_instance(rng, 30, 4)
    box = ParameterBox.symmetric(4)
    for _ in range(5):
        theta = rng.uniform(-2, 2, 4)
        before = empirical_risk(ds, theta) + 0.02 * np.count_nonzero(theta)
        polished = coordinate_polish(ds, box, theta, 0.02)
        after = empirical_risk(ds, polished) + 0.02 * np.count_nonzero(np.abs(polished) > 1e-6)
        assert after <= before + 1e-12
        assert box.contains(polished)


# ---------------------------------------------------------------- intercept-only

def test_intercept_only_all_positive():
    ds = Dataset([1, 1, 1], [0.5, 1.0, 2.0], np.zeros((3, 1)))
    h, t = fit_intercept_only(ds)
    # every t >= -0.5 is optimal; the smallest minimiser is returned
    assert h == 0.0 and t == -0.5


def test_intercept_only_threshold_data():
    x1 = np.linspace(-1, 1, 21)
    ds = Dataset((x1 >= 0.3).astype(int), x1, np.zeros((21, 1)))
    h, t = fit_intercept_only(ds)
    assert h == 0.0
    assert -0.4 < t <= -0.3 + 1e-12


def test_intercept_only_matches_grid_search():
    rng = np.random.default_rng(12)
    grid = np.round(np.arange(-100000, 100001) * 1e-4, 10)
    for _ in range(5):
        ds = random_instance(rng, 15, 1)
        h, t = fit_intercept_only(ds)
        # grid values away from breakpoints cover every risk level attained
        errs = [np.mean((ds.x1 + g >= 0) != (ds.labels == 1)) for g in grid[::7]]
        assert h == pytest.approx(min(errs), abs=1e-12)
        assert np.mean((ds.x1 + t >= 0) != (ds.labels == 1)) == h


def test_intercept_only_empty_range():
    ds = Dataset([1], [0.0], np.zeros((1, 1)))
    with pytest.raises(ValueError):
        fit_intercept_only(ds, (1.0, -1.0))
