"""Equivalence versus orthogonality of Gaussian measures on a manifold.

Built-in manifolds (homogeneous spaces with ``lambda_n = Theta(n^2)`` and
``t(n) = Theta(n^(d-1))``) get exact microergodic rules; anything else falls
back to a numeric diagnostic on the series
``sum_n t(n) ((rho2(n) - rho1(n)) / rho1(n))^2``, whose convergence decides
equivalence when the correlation operators commute (automatic for the
built-ins, the caller's responsibility for custom spectra).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .kernel import (
    DEFAULT_POLICY,
    MaternParams,
    SqExpParams,
    TruncationPolicy,
    matern_density_fn,
    norm_constant,
    sqexp_density_fn,
)
from .spectrum import CUSTOM, ManifoldSpec, multiplicities

__all__ = [
    "Verdict",
    "EquivalenceVerdict",
    "microergodic",
    "series_test_partial",
    "series_summands",
    "tail_exponent",
    "classify_slope",
    "equivalence_verdict",
    "matched_sigma2",
]

# dead-band around the convergence boundary slope -1
CONVERGENT_SLOPE = -1.2
DIVERGENT_SLOPE = -0.8


class Verdict(str, enum.Enum):
    EQUIVALENT = "Equivalent"
    ORTHOGONAL = "Orthogonal"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class EquivalenceVerdict:
    verdict: Verdict
    rule: str
    diagnostic: Optional[Tuple[float, float]] = None  # (partial_sum, tail_exponent)

    def as_dict(self):
        out = {"verdict": self.verdict.value, "rule": self.rule}
        if self.diagnostic is not None:
            out["partial_sum"], out["tail_exponent"] = self.diagnostic
        return out


def microergodic(m: ManifoldSpec, p: MaternParams, t: TruncationPolicy = DEFAULT_POLICY) -> float:
    """``sigma2 / C_{nu,alpha}``."""
    return p.sigma2 / norm_constant(m, p, t).value


def matched_sigma2(m, nu, sigma2, alpha, alpha_other, t: TruncationPolicy = DEFAULT_POLICY) -> float:
    """Variance at ``alpha_other`` sharing the microergodic value of ``(sigma2, alpha)``."""
    C = norm_constant(m, MaternParams(nu, alpha), t).value
    C_other = norm_constant(m, MaternParams(nu, alpha_other), t).value
    return sigma2 * C_other / C


def series_summands(m: ManifoldSpec, rho1, rho2, n) -> np.ndarray:
    """``t(n) ((rho2(n) - rho1(n)) / rho1(n))^2`` over the index array ``n``."""
    n = np.asarray(n)
    r1 = np.asarray(rho1(n), dtype=float)
    if np.any(~(r1 > 0)):
        raise ValueError("rho1 must be strictly positive on the tested range")
    rel = np.asarray(rho2(n), dtype=float) / r1 - 1.0
    return multiplicities(m, n) * rel * rel


def series_test_partial(m: ManifoldSpec, rho1, rho2, N: int) -> float:
    """Partial sum ``S_N`` of the series test over ``0 <= n <= N``."""
    return float(np.sum(series_summands(m, rho1, rho2, np.arange(int(N) + 1))))


def tail_exponent(m: ManifoldSpec, rho1, rho2, n_lo: int, n_hi: int, samples: int = 4000) -> float:
    """Least-squares slope of log-summand against log n over ``[n_lo, n_hi]``.

    Returns ``-inf`` when every summand is zero (identical densities). Long
    ranges are sampled on a log grid.
    """
    if not (10 <= n_lo < n_hi):
        raise ValueError("need 10 <= n_lo < n_hi")
    if n_hi - n_lo + 1 <= samples:
        n = np.arange(n_lo, n_hi + 1)
    else:
        n = np.unique(np.round(np.geomspace(n_lo, n_hi, samples)).astype(np.int64))
    y = series_summands(m, rho1, rho2, n)
    keep = y > 0
    if not np.any(keep):
        return -math.inf
    if keep.sum() < 2:
        raise ValueError("degenerate fit: fewer than two nonzero summands")
    slope, _ = np.polyfit(np.log(n[keep]), np.log(y[keep]), 1)
    return float(slope)


def classify_slope(slope: float) -> Verdict:
    if slope < CONVERGENT_SLOPE:
        return Verdict.EQUIVALENT
    if slope > DIVERGENT_SLOPE:
        return Verdict.ORTHOGONAL
    return Verdict.INCONCLUSIVE


def _close(a, b, tol):
    return abs(a - b) <= tol * max(abs(a), abs(b))


def _diagnostic_range(m):
    if m.kind == CUSTOM:
        hi = m.n_max
        return max(10, hi // 10), hi
    return 100, 10**4


def equivalence_verdict(m: ManifoldSpec, p1, p2, t: TruncationPolicy = DEFAULT_POLICY, tol: float = 1e-9) -> EquivalenceVerdict:
    """Decide ``P1 = P2`` (equivalent) or ``P1 _|_ P2`` (orthogonal).

    ``p1`` and ``p2`` are both :class:`MaternParams` (same ``nu``) or both
    :class:`SqExpParams`.
    """
    if type(p1) is not type(p2) or not isinstance(p1, (MaternParams, SqExpParams)):
        raise TypeError("both parameter sets must be of the same covariogram family")
    if isinstance(p1, MaternParams) and p1.nu != p2.nu:
        raise ValueError("Matérn parameter sets must share nu")

    if m.kind == CUSTOM:
        if isinstance(p1, MaternParams):
            rho1, rho2 = matern_density_fn(m, p1, t), matern_density_fn(m, p2, t)
        else:
            rho1, rho2 = sqexp_density_fn(m, p1, t), sqexp_density_fn(m, p2, t)
        lo, hi = _diagnostic_range(m)
        if hi <= lo:
            return EquivalenceVerdict(Verdict.INCONCLUSIVE, "series-diagnostic")
        slope = tail_exponent(m, rho1, rho2, lo, hi)
        partial = series_test_partial(m, rho1, rho2, hi)
        verdict = Verdict.EQUIVALENT if slope == -math.inf else classify_slope(slope)
        return EquivalenceVerdict(verdict, "series-diagnostic", (partial, slope))

    if isinstance(p1, SqExpParams):
        same = _close(p1.sigma2, p2.sigma2, tol) and _close(p1.alpha, p2.alpha, tol)
        return EquivalenceVerdict(Verdict.EQUIVALENT if same else Verdict.ORTHOGONAL, "sqexp")

    if m.dimension <= 3:
        same = _close(microergodic(m, p1, t), microergodic(m, p2, t), tol)
        return EquivalenceVerdict(Verdict.EQUIVALENT if same else Verdict.ORTHOGONAL, "matern-d≤3")
    same = _close(p1.sigma2, p2.sigma2, tol) and _close(p1.alpha, p2.alpha, tol)
    return EquivalenceVerdict(Verdict.EQUIVALENT if same else Verdict.ORTHOGONAL, "matern-d≥4")
