"""Arbitrary-precision recomputation of the bound report, written independently."""

import mpmath

mpmath.mp.dps = 50


def report(q, eps, sigma, M, c, n, p):
    q, n, p = int(q), int(n), int(p)
    eps, sigma, M, c = (mpmath.mpf(str(v)) for v in (eps, sigma, M, c))
    L = mpmath.log(max(p, n))
    lam = c * mpmath.sqrt(L / n)
    m0 = max(q, min(p, int(mpmath.floor(1 / lam))))
    r_n = q * L
    s = (1 + eps) * q + eps
    j0 = int(mpmath.ceil((mpmath.log(m0) - mpmath.log(eps)) / abs(mpmath.log(2 * mpmath.sqrt(M)) - mpmath.log(c))))
    upper = min(max(m0, int(mpmath.floor(s)), (j0 - 1) * q + int(mpmath.floor(mpmath.sqrt(m0)))), p)
    ineq = {k: 4 * (k + 1) * mpmath.log(M * k * L) <= k * L + 6 * (k + 1) * mpmath.log(2) for k in range(q, upper + 1)}
    tail = mpmath.exp(-sigma * r_n)
    return {
        "lam": lam, "m0": m0, "r_n": r_n, "s": s, "j0": j0,
        "delta_theory": 2 * mpmath.sqrt(M) / c,
        "condition_c_ok": c >= 2 * mpmath.sqrt(M) * (1 + eps) / eps,
        "k_range": (q, upper), "inequality_ok": ineq,
        "sparsity_tail_bound": j0 * tail,
        "risk_tail_bound": (1 + j0) * tail,
        "risk_threshold": 3 * lam * s,
        "mean_risk_bound": (1 + j0) * tail + 3 * lam * s,
    }


def lemma1(k, n, p, M, sigma):
    M, sigma = mpmath.mpf(str(M)), mpmath.mpf(str(sigma))
    L = mpmath.log(max(p, n))
    return (mpmath.sqrt(M * k * L / n), mpmath.exp(-sigma * k * L),
            4 * (k + 1) * mpmath.log(M * k * L) <= k * L + 6 * (k + 1) * mpmath.log(2))
