import json
from fractions import Fraction

import mpmath
import pytest
import theory_oracle

from l0erm.theory import (
    TheoryInputs,
    TheoryReport,
    empirical_check,
    lemma1_bound,
    sparsity_level,
    theory_report,
)

FIXTURE = TheoryInputs(q=1, epsilon=0.5, sigma=1.0, M_sigma=1.0, c=8.0, n=100, p=200)


def _close(a, b, digits=12):
    return mpmath.almosteq(mpmath.mpf(a), b, rel_eps=mpmath.mpf(10) ** (-digits))


@pytest.mark.parametrize("inputs", [
    FIXTURE,
    TheoryInputs(q=2, epsilon=0.3, sigma=0.5, M_sigma=0.2, c=3.0, n=500, p=50),
    TheoryInputs(q=3, epsilon=0.1, sigma=2.0, M_sigma=0.05, c=1.0, n=1000, p=40),
    TheoryInputs(q=1, epsilon=0.9, sigma=1.0, M_sigma=4.0, c=0.5, n=100, p=10),
])
def test_report_matches_high_precision(inputs):
    got = theory_report(inputs)
    ref = theory_oracle.report(**{"q": inputs.q, "eps": inputs.epsilon, "sigma": inputs.sigma,
                                  "M": inputs.M_sigma, "c": inputs.c, "n": inputs.n, "p": inputs.p})
    for key in ("lam", "r_n", "s", "delta_theory", "sparsity_tail_bound", "risk_tail_bound",
                "risk_threshold", "mean_risk_bound"):
        assert _close(getattr(got, key), ref[key]), key
    assert got.m0 == ref["m0"] and got.j0 == ref["j0"]
    assert got.k_range == ref["k_range"]
    assert got.inequality_ok == ref["inequality_ok"]
    assert got.condition_c_ok == ref["condition_c_ok"]


def test_invariants():
    for q in range(1, 6):
        for eps in (0.01, 0.3, 0.99):
            r = theory_report(TheoryInputs(q, eps, 1.0, 1.0, 8.0, 100, 20))
            assert r.s > q and r.j0 >= 1 and q <= r.m0 <= 20
            assert r.mean_risk_bound >= r.risk_tail_bound
            assert r.mean_risk_bound >= r.risk_threshold


def test_s_arithmetic_example():
    assert sparsity_level(2, 0.5) == 3.5


def test_small_epsilon_caps_selection_at_q_plus_one():
    # exact rational arithmetic: eps < 1/(q+1) gives s < q + 1, so ||theta||_0 <= s means <= q + 1
    for q in range(1, 11):
        for num in range(1, 60):
            eps = Fraction(num, 60)
            s = (1 + eps) * q + eps
            assert s == q + eps * (q + 1)
            if eps < Fraction(1, q + 1):
                assert s < q + 1 and int(s) <= q + 1
            else:
                assert s >= q + 1


def test_undefined_j0():
    r = theory_report(TheoryInputs(1, 0.5, 1.0, 1.0, 2.0, 100, 200))
    assert r.j0 is None and r.sparsity_tail_bound is None and not r.conditions_hold
    assert "undefined" in r.to_text()


def test_json_round_trip():
    r = theory_report(FIXTURE)
    back = TheoryReport.from_dict(json.loads(r.to_json()))
    assert back == r
    assert back.to_json() == r.to_json()


def test_input_validation():
    with pytest.raises(ValueError):
        TheoryInputs(0, 0.5, 1, 1, 1, 10, 10)
    with pytest.raises(ValueError):
        TheoryInputs(1, 1.0, 1, 1, 1, 10, 10)
    with pytest.raises(ValueError):
        TheoryInputs(5, 0.5, 1, 1, 1, 10, 4)
    with pytest.raises(ValueError):
        TheoryInputs(1, 0.5, 1, 0.0, 1, 10, 10)


def test_lemma1_spot_values():
    for k, n, p, M, sig in [(1, 100, 200, 1.0, 1.0), (3, 50, 10, 0.4, 2.0), (5, 1000, 1000, 2.5, 0.3)]:
        got = lemma1_bound(k, n, p, M, sig)
        thr, tail, ok = theory_oracle.lemma1(k, n, p, M, sig)
        assert _close(got.threshold, thr) and _close(got.tail, tail) and got.side_condition_ok == ok


def test_lemma1_monotonicity():
    tails = [lemma1_bound(k, 100, 50, 1.0, 1.0).tail for k in range(1, 10)]
    assert all(a > b for a, b in zip(tails, tails[1:]))
    a, b = lemma1_bound(2, 100, 50, 1.0, 1.0), lemma1_bound(2, 400, 50, 1.0, 1.0)
    # sqrt(ln(400)/400) / sqrt(ln(100)/100)
    assert b.threshold / a.threshold == pytest.approx(((mpmath.log(400) / 400) / (mpmath.log(100) / 100)) ** 0.5)
    with pytest.raises(ValueError):
        lemma1_bound(0, 10, 5, 1.0, 1.0)


def test_empirical_check():
    r = theory_report(FIXTURE)
    chk = empirical_check(r, [1, 1, 3, 0], [0.01, 0.02, 0.0, 20.0])
    assert chk.freq_sparsity_exceeds == 0.25
    assert chk.freq_risk_exceeds == 0.25
    assert chk.binding is False
    with pytest.raises(ValueError):
        empirical_check(r, [], [])
