"""Simulation designs with a sparse linear Bayes rule.

V ~ N(0, Sigma) with Sigma_ij = 0.25^|i-j|; X1 = V1 and the selectable
features are (1, V2, ..., Vp). The label is ``1{X1 + Xt @ theta* >= s(X) xi}``
with xi standard logistic, so ``P(Y=1 | X) = Lambda((X1 + Xt @ theta*) / s(X))``.

Random numbers come from numpy's Philox counter-based generator keyed by
``(seed, repetition, purpose)``; normals use numpy's ziggurat sampler.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, LinearClassifier

COVARIANCE_RHO = 0.25
BASE_SCALE = 0.2
THETA2 = {"i": -0.55, "ii": -1.85}

# stream purposes; fixed so that adding a consumer never shifts another
PURPOSE_TRAIN = 0
PURPOSE_VALID = 1
PURPOSE_CV = 2
PURPOSE_LASSO_CV = 3


@dataclass(frozen=True)
class DgpSpec:
    variant: str
    p: int
    theta2_star: float
    base_scale: float = BASE_SCALE
    covariance_rho: float = COVARIANCE_RHO

    @classmethod
    def make(cls, variant: str, p: int) -> "DgpSpec":
        variant = str(variant).lower()
        if variant not in THETA2:
            raise ValueError(f"unknown DGP variant {variant!r}; expected 'i' or 'ii'")
        if p < 2:
            raise ValueError("p must be at least 2")
        return cls(variant, int(p), THETA2[variant])

    @property
    def theta_star(self) -> np.ndarray:
        theta = np.zeros(self.p)
        theta[1] = self.theta2_star
        return theta

    def noise_scale(self, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
        if self.variant == "i":
            return np.full(len(v1), self.base_scale)
        s = v1 + v2
        return self.base_scale * (1.0 + 2.0 * s**2 + s**4)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "p": self.p,
            "theta2_star": self.theta2_star,
            "base_scale": self.base_scale,
            "covariance_rho": self.covariance_rho,
            "theta_star": [float(v) for v in self.theta_star],
        }


@dataclass(frozen=True)
class GeneratedSample:
    dataset: Dataset
    theta_star: np.ndarray
    eta: np.ndarray


def rng_stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``, insensitive to call order."""
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return np.random.Generator(np.random.Philox(ss))


def build_covariance(p: int, rho: float = COVARIANCE_RHO) -> np.ndarray:
    if p < 1:
        raise ValueError("p must be positive")
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def cholesky(matrix) -> np.ndarray:
    """Lower-triangular L with ``L @ L.T == matrix``; raises on non-PD input."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise ValueError("matrix must be symmetric")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"matrix is not positive definite: {exc}") from exc


def standard_logistic(rng: np.random.Generator, size: int) -> np.ndarray:
    """Inverse-CDF draws ``ln(u / (1 - u))``."""
    u = rng.random(size)
    while np.any(u == 0.0):
        u[u == 0.0] = rng.random(int(np.count_nonzero(u == 0.0)))
    return np.log(u) - np.log1p(-u)


def logistic_cdf(z):
    z = np.asarray(z, dtype=float)
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def generate(spec: DgpSpec, n: int, seed: int | np.random.Generator) -> GeneratedSample:
    if n < 1:
        raise ValueError("n must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else rng_stream(seed)
    L = cholesky(build_covariance(spec.p, spec.covariance_rho))
    V = rng.standard_normal((n, spec.p)) @ L.T
    xi = standard_logistic(rng, n)
    x1 = V[:, 0]
    xt = np.column_stack([np.ones(n), V[:, 1:]])
    theta = spec.theta_star
    index = x1 + xt @ theta
    scale = spec.noise_scale(V[:, 0], V[:, 1])
    labels = (index >= scale * xi).astype(np.int64)
    eta = logistic_cdf(index / scale)
    return GeneratedSample(Dataset(labels, x1, xt), theta, eta)


def bayes_classifier(spec: DgpSpec) -> LinearClassifier:
    return LinearClassifier(spec.theta_star)
