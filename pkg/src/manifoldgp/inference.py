"""Likelihood, closed-form variance MLE, BLUP and cross-measure prediction error.

All linear algebra goes through one Cholesky factorization per correlation
matrix, reused for the determinant, quadratic forms and kriging weights. When
the factorization fails a small diagonal jitter is added on an escalating
ladder and always reported back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .kernel import DEFAULT_POLICY, TruncationPolicy, correlation_matrix, cross_correlation
from .spectrum import ManifoldSpec, cross_angles, make_point, make_sites, pairwise_angles

__all__ = [
    "Dataset",
    "FitResult",
    "PredictionResult",
    "FactorizationError",
    "Factor",
    "factorize",
    "log_likelihood",
    "mle_sigma2",
    "blup",
    "predictive_mse_cross",
    "MIN_SEPARATION",
]

MIN_SEPARATION = 1e-9
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)


class FactorizationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Sites on ``manifold`` with one scalar observation each."""

    manifold: ManifoldSpec
    sites: np.ndarray
    observations: np.ndarray

    def __post_init__(self):
        sites = make_sites(self.manifold, self.sites)
        z = np.asarray(self.observations, dtype=float).reshape(-1)
        if len(sites) < 1 or len(sites) != len(z):
            raise ValueError("need n >= 1 sites and exactly one observation per site")
        if not np.all(np.isfinite(z)):
            raise ValueError("observations must be finite")
        if len(sites) > 1:
            ang = pairwise_angles(self.manifold, sites) / self.manifold.angle_scale()
            np.fill_diagonal(ang, np.inf)
            if ang.min() <= MIN_SEPARATION:
                raise ValueError(f"sites must be pairwise distinct (separation > {MIN_SEPARATION})")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "observations", z)

    def __len__(self):
        return len(self.observations)


@dataclass(frozen=True)
class FitResult:
    sigma2_hat: float
    log_likelihood: float
    condition_estimate: float
    jitter_used: float


@dataclass(frozen=True)
class PredictionResult:
    mean: float
    mse: float


@dataclass
class Factor:
    """Cholesky factor of a (possibly jittered) correlation matrix."""

    cho: tuple
    jitter: float
    logdet: float
    condition: float

    def solve(self, b):
        return linalg.cho_solve(self.cho, b, check_finite=False)

    @property
    def lower(self):
        c, low = self.cho
        return np.tril(c) if low else np.triu(c).T


def factorize(G) -> Factor:
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    scale = np.trace(G) / n
    last = None
    for rung in JITTER_LADDER:
        delta = rung * scale
        try:
            c = linalg.cholesky(G + delta * np.eye(n), lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            last = exc
            continue
        d = np.diag(c)
        if np.any(~(d > 0)):
            continue
        cond = float((d.max() / d.min()) ** 2)
        return Factor((c, True), delta, float(2.0 * np.sum(np.log(d))), cond)
    raise FactorizationError(f"correlation matrix not positive definite after maximal jitter: {last}")


def _factor_for(d: Dataset, nu, alpha, t):
    G, _ = correlation_matrix(d.manifold, nu, alpha, t, d.sites)
    return factorize(G)


def _loglik(n, logdet, quad, sigma2):
    return -0.5 * n * math.log(2.0 * math.pi * sigma2) - 0.5 * logdet - quad / (2.0 * sigma2)


def log_likelihood(d: Dataset, m: ManifoldSpec, nu, alpha, sigma2, t: TruncationPolicy = DEFAULT_POLICY) -> float:
    """Gaussian log-likelihood of ``d`` under Matérn ``(nu, alpha, sigma2)``."""
    _same_manifold(d, m)
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    f = _factor_for(d, nu, alpha, t)
    z = d.observations
    return _loglik(len(z), f.logdet, float(z @ f.solve(z)), float(sigma2))


def mle_sigma2(d: Dataset, m: ManifoldSpec, nu, alpha, t: TruncationPolicy = DEFAULT_POLICY) -> FitResult:
    """Closed-form ``sigma2_hat = z' Gamma(alpha)^-1 z / n`` at fixed ``alpha``."""
    _same_manifold(d, m)
    f = _factor_for(d, nu, alpha, t)
    return fit_with_factor(d.observations, f)


def fit_with_factor(z, f: Factor) -> FitResult:
    z = np.asarray(z, dtype=float)
    n = len(z)
    s2 = float(z @ f.solve(z)) / n
    ll = _loglik(n, f.logdet, n * s2, s2) if s2 > 0 else math.inf
    return FitResult(s2, ll, f.condition, f.jitter)


def blup(d: Dataset, m: ManifoldSpec, nu, alpha, sigma2, t: TruncationPolicy, x0) -> PredictionResult:
    """Kriging mean ``gamma' Gamma^-1 z`` and its error ``sigma2 (1 - gamma' Gamma^-1 gamma)``."""
    _same_manifold(d, m)
    x0 = make_point(m, x0)
    hit = _coincident(m, x0, d.sites)
    if hit is not None:
        return PredictionResult(float(d.observations[hit]), 0.0)
    f = _factor_for(d, nu, alpha, t)
    g = cross_correlation(m, nu, alpha, t, [x0], d.sites)[0][0]
    w = f.solve(g)
    mse = float(sigma2) * (1.0 - float(g @ w))
    return PredictionResult(float(w @ d.observations), max(mse, 0.0))


def predictive_mse_cross(m: ManifoldSpec, truth, model, sites, x0, t: TruncationPolicy = DEFAULT_POLICY) -> float:
    """``E_truth (Zhat(model) - Z0)^2`` for the BLUP built under ``model``.

    ``truth`` and ``model`` are ``(nu, alpha, sigma2)`` triples. With weights
    ``w = Gamma_b^-1 gamma_b``, the error is
    ``sigma2_a (1 - 2 w' gamma_a + w' Gamma_a w)``.
    """
    nu_a, alpha_a, s2_a = truth
    nu_b, alpha_b, _ = model
    sites = make_sites(m, sites)
    x0 = make_point(m, x0)
    if _coincident(m, x0, sites) is not None:
        return 0.0
    Ga, _ = correlation_matrix(m, nu_a, alpha_a, t, sites)
    ga = cross_correlation(m, nu_a, alpha_a, t, [x0], sites)[0][0]
    if (nu_a, alpha_a) == (nu_b, alpha_b):
        Gb, gb = Ga, ga
    else:
        Gb, _ = correlation_matrix(m, nu_b, alpha_b, t, sites)
        gb = cross_correlation(m, nu_b, alpha_b, t, [x0], sites)[0][0]
    w = factorize(Gb).solve(gb)
    return cross_mse_from_weights(w, Ga, ga, s2_a)


def cross_mse_from_weights(w, Ga, ga, sigma2_a) -> float:
    return max(float(sigma2_a) * (1.0 - 2.0 * float(w @ ga) + float(w @ Ga @ w)), 0.0)


def _coincident(m, x0, sites):
    ang = cross_angles(m, [x0], sites)[0]
    i = int(np.argmin(ang))
    return i if ang[i] / m.angle_scale() <= MIN_SEPARATION else None


def _same_manifold(d, m):
    if d.manifold != m:
        raise ValueError("dataset belongs to a different manifold")
