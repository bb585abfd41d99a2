import numpy as np
import pytest
from scipy import integrate, stats

from l0erm import dgp
from l0erm.dgp import DgpSpec, bayes_classifier, build_covariance, cholesky, generate, rng_stream


def test_covariance_examples():
    np.testing.assert_array_equal(build_covariance(1), [[1.0]])
    np.testing.assert_array_equal(build_covariance(2), [[1.0, 0.25], [0.25, 1.0]])
    assert build_covariance(3)[0, 2] == 0.0625
    with pytest.raises(ValueError):
        build_covariance(0)


def test_cholesky_examples():
    np.testing.assert_array_equal(cholesky(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(cholesky([[4.0, 0.0], [0.0, 9.0]]), np.diag([2.0, 3.0]))
    S = build_covariance(5)
    L = cholesky(S)
    assert np.allclose(np.triu(L, 1), 0)
    assert np.abs(L @ L.T - S).max() < 1e-10


def test_cholesky_rejects_bad_input():
    with pytest.raises(np.linalg.LinAlgError):
        cholesky([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ValueError):
        cholesky([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ValueError):
        cholesky(np.ones((2, 3)))


def test_spec_values():
    a, b = DgpSpec.make("i", 10), DgpSpec.make("ii", 10)
    assert a.theta2_star == -0.55 and b.theta2_star == -1.85
    assert np.count_nonzero(a.theta_star[1:]) == 1 and a.theta_star[0] == 0.0
    np.testing.assert_array_equal(bayes_classifier(a).theta, [0, -0.55] + [0] * 8)
    np.testing.assert_array_equal(bayes_classifier(b).theta, [0, -1.85] + [0] * 8)
    np.testing.assert_array_equal(a.noise_scale(np.ones(2), np.ones(2)), [0.2, 0.2])
    # s = 2: 0.2 * (1 + 8 + 16)
    assert b.noise_scale(np.array([1.0]), np.array([1.0]))[0] == pytest.approx(5.0)
    with pytest.raises(ValueError):
        DgpSpec.make("iii", 10)
    with pytest.raises(ValueError):
        DgpSpec.make("i", 1)


def test_generate_layout_and_determinism():
    spec = DgpSpec.make("ii", 6)
    s1 = generate(spec, 200, 42)
    s2 = generate(spec, 200, 42)
    np.testing.assert_array_equal(s1.dataset.xt, s2.dataset.xt)
    np.testing.assert_array_equal(s1.dataset.labels, s2.dataset.labels)
    np.testing.assert_array_equal(s1.eta, s2.eta)
    assert np.all(s1.dataset.xt[:, 0] == 1.0)
    assert s1.dataset.p == 6
    assert np.all((s1.eta >= 0) & (s1.eta <= 1))
    assert not np.array_equal(generate(spec, 200, 43).dataset.x1, s1.dataset.x1)


def test_streams_are_keyed_not_sequential():
    a = rng_stream(1, 5, dgp.PURPOSE_TRAIN).random(3)
    rng_stream(1, 4, dgp.PURPOSE_TRAIN).random(100)  # consuming another stream changes nothing
    np.testing.assert_array_equal(rng_stream(1, 5, dgp.PURPOSE_TRAIN).random(3), a)
    assert not np.array_equal(rng_stream(1, 5, dgp.PURPOSE_VALID).random(3), a)


@pytest.mark.parametrize("variant", ["i", "ii"])
def test_bayes_identity_on_every_row(variant):
    spec = DgpSpec.make(variant, 8)
    s = generate(spec, 20000, 3)
    pred = bayes_classifier(spec).predict(s.dataset)
    np.testing.assert_array_equal(pred, (s.eta >= 0.5).astype(int))


def test_large_sample_covariance():
    spec = DgpSpec.make("i", 6)
    s = generate(spec, 50000, 11)
    V = np.column_stack([s.dataset.x1, s.dataset.xt[:, 1:]])
    assert np.abs(np.cov(V, rowvar=False) - build_covariance(6)).max() < 0.05


def test_logistic_draws_ks():
    draws = dgp.standard_logistic(rng_stream(9), 10000)
    assert stats.kstest(draws, stats.logistic.cdf).statistic < 0.02


@pytest.mark.parametrize("variant", ["i", "ii"])
def test_label_mean_matches_integral(variant):
    spec = DgpSpec.make(variant, 3)
    s = generate(spec, 50000, 5)
    rho = spec.covariance_rho
    cov = np.array([[1.0, rho], [rho, 1.0]])
    dens = stats.multivariate_normal(np.zeros(2), cov).pdf

    def integrand(v2, v1):
        scale = spec.noise_scale(np.array([v1]), np.array([v2]))[0]
        return stats.logistic.cdf((v1 + spec.theta2_star * v2) / scale) * dens([v1, v2])

    expected, _ = integrate.dblquad(integrand, -8, 8, -8, 8, epsabs=1e-8)
    y = s.dataset.labels
    se = y.std() / np.sqrt(len(y))
    assert abs(y.mean() - expected) < 3 * se
