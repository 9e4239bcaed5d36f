"""Laplace-Beltrami eigenstructure and geodesic geometry of compact manifolds.

Every downstream module talks to a manifold only through :class:`ManifoldSpec`:
its dimension, volume, eigenvalues ``lambda_n``, multiplicities ``t(n)`` and,
where an addition theorem is available, the normalized addition kernel
``A_n(c)`` with ``sum_l f_{n,l}(x) f_{n,l}(y) = t(n) / V * A_n(cos angle)``.

Built-in manifolds
------------------
``circle()``
    Unit circumference, points ``theta`` in ``[0, 1)``, ``lambda_n = 4 pi^2 n^2``.
    The addition kernel is the Chebyshev polynomial ``T_n`` of the cosine of the
    *angular* separation ``2 pi * dist``.
``sphere2()``
    Unit sphere in R^3, ``lambda_n = n(n+1)``, ``A_n = P_n`` (Legendre).
``sphere(d)``
    Unit sphere in R^{d+1}; spectral-level operations only for ``d >= 3``.
``custom(...)``
    A finite spectral table, optionally with a user addition kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "ManifoldSpec",
    "circle",
    "sphere2",
    "sphere",
    "custom",
    "load_spectrum_table",
    "parse_manifold",
    "eigenvalue",
    "multiplicity",
    "eigenvalues",
    "multiplicities",
    "make_point",
    "make_sites",
    "geodesic_distance",
    "pairwise_angles",
    "cross_angles",
    "legendre_bonnet",
]

CIRCLE = "circle"
SPHERE2 = "sphere2"
SPHERE = "sphere"
CUSTOM = "custom"


@dataclass(frozen=True)
class ManifoldSpec:
    """Spectral description of a compact Riemannian manifold.

    Instances are immutable and hashable, so they can key coefficient caches.
    Use the factory functions rather than constructing this directly.
    """

    kind: str
    dimension: int
    volume: float
    # custom tables; empty for built-ins
    table_eigenvalues: tuple = ()
    table_multiplicities: tuple = ()
    custom_addition: Optional[Callable[[int, np.ndarray], np.ndarray]] = field(
        default=None, compare=False
    )

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if not (self.volume > 0 and math.isfinite(self.volume)):
            raise ValueError("volume must be positive and finite")

    @property
    def n_max(self) -> Optional[int]:
        """Largest supported index, ``None`` for infinite built-in spectra."""
        if self.kind == CUSTOM:
            return len(self.table_eigenvalues) - 1
        return None

    @property
    def has_addition_kernel(self) -> bool:
        return self.kind in (CIRCLE, SPHERE2) or self.custom_addition is not None

    @property
    def ambient_dim(self) -> int:
        """Length of a point's coordinate vector (1 for the circle)."""
        if self.kind == CIRCLE:
            return 1
        return self.dimension + 1

    def label(self) -> str:
        if self.kind == SPHERE:
            return f"sphere:{self.dimension}"
        return self.kind

    def angle_scale(self) -> float:
        """Factor converting geodesic distance to angular separation."""
        return 2.0 * math.pi if self.kind == CIRCLE else 1.0

    def addition_kernel(self, n: int, c):
        """Normalized addition kernel ``A_n(c)``, ``A_n(1) = 1``.

        ``c`` is the cosine of the angular separation (``2 pi dist`` on the
        circle, the geodesic distance on spheres).
        """
        c = np.asarray(c, dtype=float)
        if self.kind == CIRCLE:
            return np.cos(n * np.arccos(np.clip(c, -1.0, 1.0)))
        if self.kind == SPHERE2:
            return legendre_bonnet(n, c)
        if self.custom_addition is not None:
            _check_index(self, n)
            return np.asarray(self.custom_addition(n, c), dtype=float)
        raise ValueError(f"{self.label()} has no addition kernel")


def circle() -> ManifoldSpec:
    return ManifoldSpec(CIRCLE, 1, 1.0)


def sphere2() -> ManifoldSpec:
    return ManifoldSpec(SPHERE2, 2, 4.0 * math.pi)


def sphere(d: int) -> ManifoldSpec:
    """The unit sphere S^d. ``d = 1`` and ``d = 2`` return the dedicated specs."""
    d = int(d)
    if d == 1:
        return circle()
    if d == 2:
        return sphere2()
    if d < 1:
        raise ValueError("sphere dimension must be >= 1")
    # V(S^d) = 2 pi^{(d+1)/2} / Gamma((d+1)/2)
    vol = 2.0 * math.pi ** ((d + 1) / 2) / math.gamma((d + 1) / 2)
    return ManifoldSpec(SPHERE, d, vol)


def custom(
    dimension: int,
    volume: float,
    eigenvalues: Sequence[float],
    multiplicities: Sequence[int],
    addition_kernel: Optional[Callable[[int, np.ndarray], np.ndarray]] = None,
) -> ManifoldSpec:
    """A manifold given by a finite spectral table, indexed from ``n = 0``.

    The table is taken as the complete spectrum: series over a custom spectrum
    are finite sums and carry no truncation error.
    """
    lam = tuple(float(v) for v in eigenvalues)
    mult = tuple(int(v) for v in multiplicities)
    if len(lam) == 0 or len(lam) != len(mult):
        raise ValueError("eigenvalue and multiplicity tables must be nonempty and equal length")
    if any(v < 0 for v in lam) or any(b < a for a, b in zip(lam, lam[1:])):
        raise ValueError("eigenvalues must be nonnegative and nondecreasing")
    if any(t < 1 for t in mult):
        raise ValueError("multiplicities must be positive integers")
    return ManifoldSpec(CUSTOM, int(dimension), float(volume), lam, mult, addition_kernel)


def load_spectrum_table(path) -> ManifoldSpec:
    """Read a custom spectrum: header ``# d=<int> V=<real>``, rows ``n lambda t``."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing '# d=<int> V=<real>' header")
    header = {}
    for tok in lines[0].lstrip("#").split():
        key, _, val = tok.partition("=")
        header[key.strip()] = val.strip()
    try:
        d = int(header["d"])
        vol = float(header["V"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: bad header {lines[0]!r}") from exc
    lam, mult = [], []
    for i, ln in enumerate(lines[1:]):
        if ln.startswith("#"):
            continue
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"{path}: expected 'n lambda multiplicity', got {ln!r}")
        n, lv, tv = int(parts[0]), float(parts[1]), int(parts[2])
        if n != len(lam):
            raise ValueError(f"{path}: rows must be indexed consecutively from 0")
        lam.append(lv)
        mult.append(tv)
    return custom(d, vol, lam, mult)


def parse_manifold(text: str) -> ManifoldSpec:
    """Spec from ``circle``, ``sphere2``, ``sphere:<d>`` or ``custom:<file>``."""
    kind, _, arg = str(text).strip().partition(":")
    if kind == CIRCLE and not arg:
        return circle()
    if kind == SPHERE2 and not arg:
        return sphere2()
    if kind == SPHERE and arg:
        try:
            d = int(arg)
        except ValueError as exc:
            raise ValueError(f"bad sphere dimension in {text!r}") from exc
        return sphere(d)
    if kind == CUSTOM and arg:
        return load_spectrum_table(arg)
    raise ValueError(f"unknown manifold {text!r}; use circle, sphere2, sphere:<d> or custom:<file>")


def _check_index(m: ManifoldSpec, n):
    if np.any(np.asarray(n) < 0):
        raise ValueError("index must be >= 0")
    if m.kind == CUSTOM and np.any(np.asarray(n) > m.n_max):
        raise IndexError(f"index beyond the supplied custom spectrum (n_max={m.n_max})")


def eigenvalues(m: ManifoldSpec, n) -> np.ndarray:
    """Vectorized ``lambda_n``; accepts integer arrays (or float arrays for built-ins)."""
    n = np.asarray(n)
    _check_index(m, n)
    if m.kind == CIRCLE:
        return 4.0 * math.pi**2 * np.asarray(n, dtype=float) ** 2
    if m.kind in (SPHERE2, SPHERE):
        nf = np.asarray(n, dtype=float)
        return nf * (nf + m.dimension - 1)
    return np.asarray(m.table_eigenvalues, dtype=float)[n]


def multiplicities(m: ManifoldSpec, n) -> np.ndarray:
    """Vectorized ``t(n)`` as floats (exact for the sizes used here)."""
    n = np.asarray(n)
    _check_index(m, n)
    if m.kind == CIRCLE:
        return np.where(n == 0, 1.0, 2.0)
    if m.kind == SPHERE2:
        return 2.0 * np.asarray(n, dtype=float) + 1.0
    if m.kind == SPHERE:
        return sphere_multiplicity_continuous(m.dimension, np.asarray(n, dtype=float))
    return np.asarray(m.table_multiplicities, dtype=float)[n]


def sphere_multiplicity_continuous(d: int, x):
    """``t_d(x) = (2x+d-1)/(d-1) * prod_{j=1}^{d-2} (x+j)/j``, increasing for x >= 0.

    Agrees with ``(2n+d-1)/n * binom(n+d-2, n-1)`` at positive integers and
    gives ``t_d(0) = 1``.
    """
    x = np.asarray(x, dtype=float)
    out = (2.0 * x + d - 1.0) / (d - 1.0)
    for j in range(1, d - 1):
        out = out * (x + j) / j
    return out


def eigenvalue(m: ManifoldSpec, n: int) -> float:
    return float(eigenvalues(m, int(n)))


def multiplicity(m: ManifoldSpec, n: int) -> int:
    n = int(n)
    if m.kind == SPHERE and n >= 1:
        d = m.dimension
        return (2 * n + d - 1) * math.comb(n + d - 2, n - 1) // n
    return int(round(float(multiplicities(m, n))))


# ---------------------------------------------------------------------------
# points and distances


def make_point(m: ManifoldSpec, coords) -> np.ndarray:
    """Validate one point: circle coordinates reduce mod 1, sphere vectors normalize."""
    return make_sites(m, [coords])[0]


def make_sites(m: ManifoldSpec, coords) -> np.ndarray:
    """Validate a batch of points; returns shape ``(n,)`` (circle) or ``(n, d+1)``."""
    if m.kind == CUSTOM:
        raise ValueError("custom manifolds have no point representation")
    if m.kind == CIRCLE:
        theta = np.asarray(coords, dtype=float).reshape(-1)
        if not np.all(np.isfinite(theta)):
            raise ValueError("circle coordinates must be finite")
        theta = np.mod(theta, 1.0)
        theta[theta >= 1.0] = 0.0
        return theta
    x = np.atleast_2d(np.asarray(coords, dtype=float))
    if x.shape[1] != m.dimension + 1:
        raise ValueError(f"expected points in R^{m.dimension + 1}, got shape {x.shape}")
    norms = np.linalg.norm(x, axis=1)
    if np.any(~np.isfinite(norms)) or np.any(norms == 0):
        raise ValueError("sphere points must be finite and nonzero")
    return x / norms[:, None]


def _sphere_angle(x, y):
    # 2 atan2(|x-y|, |x+y|) is accurate at both ends of [0, pi]
    a = np.linalg.norm(x - y, axis=-1)
    b = np.linalg.norm(x + y, axis=-1)
    return 2.0 * np.arctan2(a, b)


def _circle_dist(tx, ty):
    r = np.mod(np.abs(tx - ty), 1.0)
    return np.minimum(r, 1.0 - r)


def geodesic_distance(m: ManifoldSpec, x, y) -> float:
    """Geodesic distance: circle in ``[0, 1/2]``, sphere in ``[0, pi]``."""
    if m.kind == CUSTOM:
        raise ValueError("custom manifolds have no geometry")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if m.kind == CIRCLE:
        if x.size != 1 or y.size != 1:
            raise ValueError("circle points are scalars")
        return float(_circle_dist(float(x), float(y)))
    if x.shape != (m.dimension + 1,) or y.shape != x.shape:
        raise ValueError(f"points do not belong to {m.label()}")
    return float(_sphere_angle(x, y))


def cross_angles(m: ManifoldSpec, xs, ys) -> np.ndarray:
    """Angular separations between every point of ``xs`` and every point of ``ys``."""
    if m.kind == CIRCLE:
        xs = np.asarray(xs, dtype=float).reshape(-1)
        ys = np.asarray(ys, dtype=float).reshape(-1)
        return 2.0 * math.pi * _circle_dist(xs[:, None], ys[None, :])
    xs = np.atleast_2d(xs)
    ys = np.atleast_2d(ys)
    return _sphere_angle(xs[:, None, :], ys[None, :, :])


def pairwise_angles(m: ManifoldSpec, sites) -> np.ndarray:
    ang = cross_angles(m, sites, sites)
    np.fill_diagonal(ang, 0.0)
    return ang


def legendre_bonnet(n: int, z) -> np.ndarray:
    """``P_n(z)`` by the Bonnet recurrence ``(k+1)P_{k+1} = (2k+1)z P_k - k P_{k-1}``."""
    z = np.asarray(z, dtype=float)
    p_prev = np.ones_like(z)
    if n == 0:
        return p_prev
    p = z.copy()
    for k in range(1, n):
        p_prev, p = p, ((2 * k + 1) * z * p - k * p_prev) / (k + 1)
    return p
