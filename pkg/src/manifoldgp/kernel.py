"""Spectral Matérn and squared-exponential covariograms on a :class:`ManifoldSpec`.

The Matérn covariogram with smoothness ``nu``, decay ``alpha`` and variance
``sigma2`` is

    k(x, y) = sigma2 / C * sum_n (2 nu alpha^2 + lambda_n)^(-nu - d/2) f_n(x) f_n(y),

normalized so the average variance is ``sigma2``. On homogeneous spaces the
addition theorem turns the eigenfunction products into ``t(n)/V * A_n(cos angle)``
so that ``C = (1/V) sum_n t(n) (2 nu alpha^2 + lambda_n)^(-nu-d/2)`` and
``k(x, x) = sigma2`` identically.

Every infinite sum is truncated with a certified error bound:

* normalizing sums use a two-sided integral-comparison bracket on the tail and
  report the bracket midpoint;
* pointwise kernels bound the oscillating tail by the smaller of the absolute
  tail and a summation-by-parts bound (Dirichlet kernel on the circle,
  Christoffel-Darboux partial sums of ``(2n+1) P_n`` on S^2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from . import _series
from .spectrum import (
    CIRCLE,
    CUSTOM,
    SPHERE,
    SPHERE2,
    ManifoldSpec,
    cross_angles,
    eigenvalues,
    multiplicities,
    sphere_multiplicity_continuous,
)

__all__ = [
    "MaternParams",
    "SqExpParams",
    "TruncationPolicy",
    "TruncatedValue",
    "TruncationError",
    "norm_constant",
    "matern_spectral_density",
    "matern_density_fn",
    "matern_kernel",
    "matern_kernel_angles",
    "matern_kernel_distance",
    "matern_kernel_partial",
    "required_terms",
    "truncation_bound",
    "sqexp_norm_constant",
    "sqexp_spectral_density",
    "sqexp_density_fn",
    "euclidean_matern",
    "correlation_matrix",
    "cross_correlation",
    "gram_matrix",
]

_U = np.finfo(float).eps


def _positive(name, v):
    v = float(v)
    if not (v > 0 and math.isfinite(v)):
        raise ValueError(f"{name} must be positive and finite, got {v!r}")
    return v


@dataclass(frozen=True)
class MaternParams:
    nu: float
    alpha: float
    sigma2: float = 1.0

    def __post_init__(self):
        for name in ("nu", "alpha", "sigma2"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))

    def with_sigma2(self, sigma2):
        return MaternParams(self.nu, self.alpha, sigma2)


@dataclass(frozen=True)
class SqExpParams:
    alpha: float
    sigma2: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "sigma2"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))


@dataclass(frozen=True)
class TruncationPolicy:
    """Absolute target ``epsilon`` on kernel values, hard cap ``max_terms``."""

    epsilon: float = 1e-8
    max_terms: int = 10**6

    def __post_init__(self):
        _positive("epsilon", self.epsilon)
        if int(self.max_terms) < 1:
            raise ValueError("max_terms must be >= 1")
        object.__setattr__(self, "max_terms", int(self.max_terms))


DEFAULT_POLICY = TruncationPolicy()


@dataclass(frozen=True)
class TruncatedValue:
    value: float
    error_bound: float
    terms_used: int

    def __float__(self):
        return float(self.value)


class TruncationError(RuntimeError):
    """A series could not meet its tolerance within ``max_terms`` terms."""

    def __init__(self, message, achieved_bound, terms):
        super().__init__(f"{message} (achieved bound {achieved_bound:.3e} with {terms} terms)")
        self.achieved_bound = achieved_bound
        self.terms = terms


# ---------------------------------------------------------------------------
# Matérn normalizing sums


def _exponent(m: ManifoldSpec, nu: float) -> float:
    return nu + m.dimension / 2.0


def _matern_terms(m, s, q, n0, n1):
    """``t(n) (s + lambda_n)^(-q)`` for ``n0 <= n <= n1``."""
    n = np.arange(n0, n1 + 1)
    return multiplicities(m, n) * (s + eigenvalues(m, n)) ** (-q)


def _circle_integral(s, q, a):
    """int_a^inf 2 (s + 4 pi^2 x^2)^(-q) dx, closed form via the incomplete beta."""
    c = 4.0 * math.pi**2
    w = s / (s + c * a * a)
    full = s ** (-q) * math.sqrt(s / c) * special.beta(q - 0.5, 0.5)
    return full * special.betainc(q - 0.5, 0.5, w)


def _sphered_integral(d, s, q, a, shift):
    f = lambda x: sphere_multiplicity_continuous(d, max(x + shift, 0.0)) * (s + x * (x + d - 1)) ** (-q)
    with warnings.catch_warnings():
        # quad reports its own error estimate, which the caller folds into the bracket
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, np.inf, epsabs=0.0, epsrel=1e-11, limit=200)
    return val, err


def _matern_tail(m: ManifoldSpec, s: float, q: float, N: int):
    """Bracket ``(lo, hi)`` on ``sum_{n > N} t(n) (s + lambda_n)^(-q)``.

    Where the summand f is convex on ``[N + 1/2, inf)`` the midpoint and
    trapezoid inequalities give ``int_{N+1} f + f(N+1)/2 <= tail <= int_{N+1/2} f``,
    a bracket of width O(f'). Otherwise a cruder monotone bracket is used.
    """
    if m.kind == CIRCLE:
        c = 4.0 * math.pi**2
        if (N + 0.5) ** 2 * (2.0 * q + 1.0) * c > s:
            f1 = 2.0 * (s + c * (N + 1.0) ** 2) ** (-q)
            return _circle_integral(s, q, N + 1.0) + 0.5 * f1, _circle_integral(s, q, N + 0.5)
        return _circle_integral(s, q, N + 1.0), _circle_integral(s, q, float(N))
    if m.kind == SPHERE2:
        # d/dn n(n+1) = 2n+1, so int_a^inf f = (s + a(a+1))^(1-q) / (q-1)
        F = lambda a: (s + a * (a + 1.0)) ** (1.0 - q) / (q - 1.0)
        b = s - 0.25
        if (N + 1.0) ** 2 * (2.0 * q - 1.0) > 3.0 * b:
            f1 = (2.0 * N + 3.0) * (s + (N + 1.0) * (N + 2.0)) ** (-q)
            return F(N + 1.0) + 0.5 * f1, F(N + 0.5)
        uN1 = s + (N + 1.0) * (N + 2.0)
        extra = uN1 ** (1.0 - q) / (N + 1.0)
        return max(F(N + 1.0) - extra, 0.0), F(float(N)) + extra
    if m.kind == SPHERE:
        # majorant t(x+1) on [n-1, n], minorant t(x-1) on [n, n+1]
        d = m.dimension
        hi, ehi = _sphered_integral(d, s, q, float(N), 1.0)
        lo, elo = _sphered_integral(d, s, q, N + 1.0, -1.0)
        return max(lo * (1 - 1e-9) - elo, 0.0), hi * (1 + 1e-9) + ehi
    # custom: exact remainder of the finite table
    if N >= m.n_max:
        return 0.0, 0.0
    rest = float(np.sum(_matern_terms(m, s, q, N + 1, m.n_max)))
    return rest, rest


def _sum_rounding(partial, nterms):
    return (128.0 + math.log2(max(nterms, 2))) * _U * abs(partial)


@lru_cache(maxsize=256)
def _matern_total(m: ManifoldSpec, nu: float, alpha: float, rel_tol: float, max_terms: int):
    """``(S_hat, err, N)`` with ``S = sum_n t(n)(2 nu alpha^2 + lambda_n)^(-q) = V C``."""
    s = 2.0 * nu * alpha * alpha
    q = _exponent(m, nu)
    if m.kind == CUSTOM:
        total = float(np.sum(_matern_terms(m, s, q, 0, m.n_max)))
        return total, _sum_rounding(total, m.n_max + 1), m.n_max
    N = 64
    while True:
        N = min(N, max_terms)
        partial = float(np.sum(_matern_terms(m, s, q, 0, N)))
        lo, hi = _matern_tail(m, s, q, N)
        est = partial + 0.5 * (lo + hi)
        err = 0.5 * (hi - lo) + _sum_rounding(est, N + 1)
        if err <= rel_tol * est:
            return est, err, N
        if N >= max_terms:
            raise TruncationError("normalizing constant did not converge", err / est, N)
        N *= 2


def _total_for(m, nu, alpha, rel_tol, policy):
    return _matern_total(m, float(nu), float(alpha), float(rel_tol), policy.max_terms)


def norm_constant(m: ManifoldSpec, p: MaternParams, t: TruncationPolicy = DEFAULT_POLICY) -> TruncatedValue:
    """``C_{nu,alpha}`` to relative accuracy ``t.epsilon``; independent of ``sigma2``."""
    S, err, N = _total_for(m, p.nu, p.alpha, t.epsilon, t)
    return TruncatedValue(float(S / m.volume), float(err / m.volume), N + 1)


def matern_spectral_density(m: ManifoldSpec, p: MaternParams, t: TruncationPolicy, n):
    """``rho(n) = sigma2 / C * (2 nu alpha^2 + lambda_n)^(-nu-d/2)``; vectorized in ``n``."""
    C = norm_constant(m, p, t).value
    lam = eigenvalues(m, n)
    out = p.sigma2 / C * (2.0 * p.nu * p.alpha**2 + lam) ** (-_exponent(m, p.nu))
    return float(out) if np.ndim(out) == 0 else out


def matern_density_fn(m: ManifoldSpec, p: MaternParams, t: TruncationPolicy = DEFAULT_POLICY):
    """Spectral density as a callable over index arrays (normalizer computed once)."""
    C = norm_constant(m, p, t).value
    s = 2.0 * p.nu * p.alpha**2
    q = _exponent(m, p.nu)
    scale = p.sigma2 / C

    def rho(n):
        return scale * (s + eigenvalues(m, n)) ** (-q)

    return rho


# ---------------------------------------------------------------------------
# pointwise Matérn kernel


def _oscillating_tail(m, s, q, N, angles):
    """Summation-by-parts bound on ``|sum_{n>N} t(n) w(n) A_n|`` (inf where useless)."""
    w1 = (s + float(eigenvalues(m, N + 1))) ** (-q)
    half = np.sin(0.5 * angles)
    with np.errstate(divide="ignore"):
        if m.kind == CIRCLE:
            # |sum_{a..b} cos(n theta)| <= 1 / sin(theta/2)
            return 2.0 * w1 / half
        if m.kind == SPHERE2:
            # |sum_{k<=n} (2k+1) P_k(z)| <= 2 (n+1) / (1 - z)
            rest = (N + 1.0) ** (1.0 - 2.0 * q) / (2.0 * q - 1.0)
            return 2.0 / (2.0 * half**2) * (w1 * (2.0 * N + 3.0) + rest)
    return np.full_like(angles, np.inf)


def _tail_bound(m, s, q, N, angles):
    crude = _matern_tail(m, s, q, N)[1]
    return np.minimum(crude, _oscillating_tail(m, s, q, N, angles))


@lru_cache(maxsize=64)
def _coefficients(m: ManifoldSpec, nu: float, alpha: float, N: int, S_hat: float):
    """Normalized series coefficients ``t(n) w(n) / S_hat``, n = 0..N."""
    coef = _matern_terms(m, 2.0 * nu * alpha * alpha, _exponent(m, nu), 0, N) / S_hat
    coef.setflags(write=False)
    return coef


def _series_values(m, coef, angles, threads=None):
    if m.kind == CIRCLE:
        return _series.series_sum("cosine", coef, angles, threads)
    if m.kind == SPHERE2:
        return _series.series_sum("legendre", coef, np.cos(angles), threads)
    c = np.cos(angles)
    acc = np.zeros_like(c)
    for n in range(coef.size):
        acc += coef[n] * m.addition_kernel(n, c)
    return acc


def _check_pointwise(m):
    if not m.has_addition_kernel:
        raise ValueError(f"{m.label()} has no addition kernel; pointwise kernels are unavailable")


def _circle_closed(alpha, dist):
    # cosh(alpha (d - 1/2)) / cosh(alpha/2), written with decaying exponentials
    return (np.exp(-alpha * dist) + np.exp(-alpha * (1.0 - dist))) / (1.0 + math.exp(-alpha))


def _use_closed(m, p, method):
    if method not in ("auto", "series", "closed"):
        raise ValueError(f"unknown method {method!r}")
    closed_ok = m.kind == CIRCLE and p.nu == 0.5
    if method == "closed" and not closed_ok:
        raise ValueError("closed form is available only on the circle at nu = 1/2")
    return closed_ok and method != "series"


def matern_kernel_angles(m, p: MaternParams, t: TruncationPolicy, angles, method="auto", threads=None):
    """Kernel values at angular separations.

    Returns ``(values, error_bounds, terms_used)``. One truncation level serves
    all entries (set by the worst nonzero angle), so the coefficient sequence
    is built once. Zero angles return ``sigma2`` exactly: numerator and
    normalizer are then the same series.
    """
    _check_pointwise(m)
    angles = np.asarray(angles, dtype=float)
    shape = angles.shape
    angles = angles.reshape(-1)
    if _use_closed(m, p, method):
        vals = p.sigma2 * _circle_closed(p.alpha, angles / (2.0 * math.pi))
        return vals.reshape(shape), np.zeros(shape), 0

    eps, sig2 = t.epsilon, p.sigma2
    s = 2.0 * p.nu * p.alpha**2
    q = _exponent(m, p.nu)
    S, eS, NS = _total_for(m, p.nu, p.alpha, min(eps / (4.0 * sig2), 1e-3), t)
    denom = S - eS
    nz = angles > 0
    if m.kind == CUSTOM:
        N = m.n_max
    elif not np.any(nz):
        N = 0
    else:
        worst = np.array([angles[nz].min()])
        N = 16
        while True:
            N = min(N, t.max_terms)
            b = sig2 * (_tail_bound(m, s, q, N, worst)[0] / denom + 2.0 * (N + 1) * _U)
            if b <= 0.5 * eps:
                break
            if N >= t.max_terms:
                raise TruncationError("kernel series did not converge", b, N)
            N *= 2
    coef = _coefficients(m, p.nu, p.alpha, N, S)
    vals = np.full(angles.shape, sig2)
    bounds = np.zeros(angles.shape)
    if np.any(nz):
        a = angles[nz]
        part = _series_values(m, coef, a, threads)
        tail = _tail_bound(m, s, q, N, a) if m.kind != CUSTOM else 0.0
        vals[nz] = sig2 * part
        bounds[nz] = sig2 * (np.abs(part) * eS / denom + tail / denom + 2.0 * (N + 1) * _U)
    return vals.reshape(shape), bounds.reshape(shape), N + 1


def matern_kernel_distance(m, p, t, dist, method="auto"):
    """Vectorized kernel over geodesic distances; returns ``(values, bounds, terms)``."""
    return matern_kernel_angles(m, p, t, np.asarray(dist, dtype=float) * m.angle_scale(), method)


def matern_kernel(m: ManifoldSpec, p: MaternParams, t: TruncationPolicy, x, y, method="auto") -> TruncatedValue:
    """Covariogram ``k(x, y)`` with its certified error bound."""
    _check_pointwise(m)
    ang = cross_angles(m, [x], [y]).reshape(1)
    v, b, n = matern_kernel_angles(m, p, t, ang, method)
    return TruncatedValue(float(v[0]), float(b[0]), n)


def matern_kernel_partial(m, p: MaternParams, t: TruncationPolicy, angles, N: int):
    """The partial sum ``k^N`` (terms ``n <= N``) with an accurately normalized constant."""
    _check_pointwise(m)
    if m.kind == CUSTOM:
        N = min(N, m.n_max)
    # a relative error in C rescales k^N uniformly, so differences stay accurate
    S, _, _ = _total_for(m, p.nu, p.alpha, min(t.epsilon, 1e-9), t)
    coef = _coefficients(m, p.nu, p.alpha, int(N), S)
    return p.sigma2 * _series_values(m, coef, np.asarray(angles, dtype=float).reshape(-1))


def required_terms(p: MaternParams, eps: float) -> int:
    """Truncation level making ``3 sigma2 alpha^(-2nu-2) N^(-2nu) <= eps`` on S^2."""
    eps = _positive("eps", eps)
    return int(math.floor((3.0 * p.sigma2 / (eps * p.alpha ** (2 * p.nu + 2))) ** (1.0 / (2 * p.nu)))) + 1


def truncation_bound(p: MaternParams, N: int) -> float:
    """``3 sigma2 alpha^(-2nu-2) N^(-2nu)``, the closed-form S^2 truncation bound."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return 3.0 * p.sigma2 * p.alpha ** (-2 * p.nu - 2) * float(N) ** (-2 * p.nu)


# ---------------------------------------------------------------------------
# squared exponential


def _sqexp_terms(m, alpha, n0, n1):
    n = np.arange(n0, n1 + 1)
    return multiplicities(m, n) * np.exp(-eigenvalues(m, n) / (2.0 * alpha * alpha))


@lru_cache(maxsize=128)
def _sqexp_total(m: ManifoldSpec, alpha: float, rel_tol: float, max_terms: int):
    if m.kind == CUSTOM:
        total = float(np.sum(_sqexp_terms(m, alpha, 0, m.n_max)))
        return total, _sum_rounding(total, m.n_max + 1), m.n_max
    N = 16
    while True:
        N = min(N, max_terms)
        g = _sqexp_terms(m, alpha, N + 1, N + 2)
        partial = float(np.sum(_sqexp_terms(m, alpha, 0, N)))
        r = g[1] / g[0] if g[0] > 0 else 0.0
        # consecutive-term ratios are nonincreasing once below 1 on built-ins
        if r < 1.0:
            tail = g[0] / (1.0 - r)
            err = tail + _sum_rounding(partial, N + 1)
            if err <= rel_tol * partial:
                return partial, err, N
        if N >= max_terms:
            raise TruncationError("squared-exponential constant did not converge", float("inf"), N)
        N *= 2


def sqexp_norm_constant(m: ManifoldSpec, p: SqExpParams, t: TruncationPolicy = DEFAULT_POLICY) -> TruncatedValue:
    S, err, N = _sqexp_total(m, float(p.alpha), float(t.epsilon), t.max_terms)
    return TruncatedValue(float(S / m.volume), float(err / m.volume), N + 1)


def sqexp_spectral_density(m: ManifoldSpec, p: SqExpParams, t: TruncationPolicy, n):
    """``rho(n) = sigma2 / C_alpha * exp(-lambda_n / (2 alpha^2))``."""
    out = sqexp_density_fn(m, p, t)(n)
    return float(out) if np.ndim(out) == 0 else out


def sqexp_density_fn(m: ManifoldSpec, p: SqExpParams, t: TruncationPolicy = DEFAULT_POLICY):
    C = sqexp_norm_constant(m, p, t).value
    scale = p.sigma2 / C

    def rho(n):
        return scale * np.exp(-eigenvalues(m, n) / (2.0 * p.alpha**2))

    return rho


# ---------------------------------------------------------------------------
# Euclidean reference


def euclidean_matern(p: MaternParams, r):
    """R^d Matérn at half-integer smoothness (1/2, 3/2, 5/2)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("distance must be nonnegative")
    ar = p.alpha * r
    if p.nu == 0.5:
        poly = 1.0
    elif p.nu == 1.5:
        poly = 1.0 + ar
    elif p.nu == 2.5:
        poly = 1.0 + ar + ar * ar / 3.0
    else:
        raise ValueError(f"closed form available only for nu in {{1/2, 3/2, 5/2}}, got {p.nu}")
    out = p.sigma2 * poly * np.exp(-ar)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# matrices


def correlation_matrix(m, nu, alpha, t: TruncationPolicy, sites, method="auto", threads=None):
    """Correlation matrix ``Gamma`` (sigma2 = 1) and its entrywise error bounds."""
    p = MaternParams(nu, alpha, 1.0)
    n = len(sites)
    if n == 0:
        raise ValueError("sites must be nonempty")
    ang = cross_angles(m, sites, sites)
    iu = np.triu_indices(n, 1)
    G = np.eye(n)
    B = np.zeros((n, n))
    if n > 1:
        v, b, _ = matern_kernel_angles(m, p, t, ang[iu], method, threads)
        G[iu] = v
        G[(iu[1], iu[0])] = v
        B[iu] = b
        B[(iu[1], iu[0])] = b
    return G, B


def cross_correlation(m, nu, alpha, t: TruncationPolicy, x0, sites, method="auto"):
    """Correlations between the points ``x0`` and ``sites``: shape ``(len(x0), len(sites))``."""
    p = MaternParams(nu, alpha, 1.0)
    ang = cross_angles(m, x0, sites)
    v, b, _ = matern_kernel_angles(m, p, t, ang, method)
    return v, b


def gram_matrix(m, p: MaternParams, t: TruncationPolicy, sites, method="auto"):
    """``(Gamma, sigma2 * Gamma)``."""
    G, _ = correlation_matrix(m, p.nu, p.alpha, t, sites, method)
    return G, p.sigma2 * G
