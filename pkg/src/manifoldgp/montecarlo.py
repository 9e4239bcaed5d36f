"""Seeded GP simulation and the fixed-domain experiment drivers.

Randomness comes from numpy's counter-based Philox generator keyed by the run
seed, with the replicate index and a stream id placed in the high counter
words. Each replicate is therefore a pure function of ``(seed, replicate)``,
and drivers can fan replicates out over threads without changing any output.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np
from scipy import stats

from . import _series
from .inference import _coincident, cross_mse_from_weights, factorize, fit_with_factor
from .kernel import (
    MaternParams,
    TruncationPolicy,
    correlation_matrix,
    cross_correlation,
    matern_kernel_partial,
    norm_constant,
    truncation_bound,
)
from .spectrum import CIRCLE, SPHERE2, ManifoldSpec, make_point, parse_manifold

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "rng_for",
    "design_sites",
    "sample_gp",
    "exp_consistency",
    "exp_normality",
    "exp_prediction",
    "exp_truncation",
    "EXPERIMENTS",
]

STREAM_DRAWS = 0
STREAM_SITES = 1
DESIGNS = ("equally_spaced", "uniform_random")
_SEQUENCE_FIELDS = ("n_schedule", "x0", "truncation_nus", "truncation_alphas", "truncation_N")


@dataclass(frozen=True)
class ExperimentConfig:
    manifold: str = "circle"
    nu: float = 0.5
    sigma2_0: float = 0.1
    alpha_0: float = 2.0
    alpha_1: float = 1.0
    design: str = "equally_spaced"
    n_schedule: tuple = (25, 50, 100, 200, 400)
    replicates: int = 200
    seed: int = 12345
    epsilon: float = 1e-8
    max_terms: int = 10**6
    # normality driver sample size
    n: int = 200
    # prediction target; None picks a fixed default per manifold
    x0: Optional[tuple] = None
    truncation_nus: tuple = (0.5, 1.0, 1.5)
    truncation_alphas: tuple = (0.5, 1.0, 2.0)
    truncation_N: tuple = (10, 100, 1000)
    truncation_pairs: int = 50
    truncation_sigma2: float = 1.0
    # execution only; not part of the reproducibility hash
    threads: int = field(default=0, compare=False)

    def __post_init__(self):
        for name in ("nu", "sigma2_0", "alpha_0", "alpha_1", "epsilon", "truncation_sigma2"):
            v = float(getattr(self, name))
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v!r}")
            object.__setattr__(self, name, v)
        for name in ("replicates", "seed", "max_terms", "n", "truncation_pairs", "threads"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise ValueError(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        for name in ("n_schedule", "truncation_nus", "truncation_alphas", "truncation_N"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        sched = [int(v) for v in self.n_schedule]
        if not sched or any(v < 1 for v in sched) or any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("n_schedule must be a strictly increasing list of positive integers")
        object.__setattr__(self, "n_schedule", tuple(sched))
        if int(self.replicates) < 1:
            raise ValueError("replicates must be >= 1")
        if self.design not in DESIGNS:
            raise ValueError(f"design must be one of {DESIGNS}")
        if self.x0 is not None:
            object.__setattr__(self, "x0", tuple(float(v) for v in np.atleast_1d(self.x0)))
        if int(self.n) < 1 or int(self.truncation_pairs) < 1:
            raise ValueError("n and truncation_pairs must be positive")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        parse_manifold(self.manifold)

    def hashed_fields(self):
        d = asdict(self)
        d.pop("threads")
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.hashed_fields(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        mapping = dict(mapping)
        for key in _SEQUENCE_FIELDS:
            v = mapping.get(key)
            if v is not None and not isinstance(v, (list, tuple)):
                mapping[key] = (v,)
        try:
            return cls(**mapping)
        except TypeError as exc:
            raise ValueError(f"bad config value: {exc}") from None

    # shared derived objects
    @property
    def spec(self) -> ManifoldSpec:
        return parse_manifold(self.manifold)

    @property
    def policy(self) -> TruncationPolicy:
        return TruncationPolicy(self.epsilon, self.max_terms)


@dataclass
class ExperimentReport:
    name: str
    records: list
    summary: dict


def rng_for(seed: int, replicate: int, stream: int = STREAM_DRAWS) -> np.random.Generator:
    """Independent generator for ``(seed, replicate, stream)``."""
    bitgen = np.random.Philox(key=int(seed), counter=[0, 0, int(replicate), int(stream)])
    return np.random.Generator(bitgen)


def _fibonacci_sphere(n):
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def design_sites(m: ManifoldSpec, design: str, n: int, seed: int = 0, replicate: int = 0) -> np.ndarray:
    """Equally spaced (roots of unity / Fibonacci lattice) or area-uniform random sites."""
    if design == "equally_spaced":
        if m.kind == CIRCLE:
            return np.arange(n) / n
        if m.kind == SPHERE2:
            return _fibonacci_sphere(n)
        raise ValueError(f"no equally spaced design for {m.label()}")
    if design == "uniform_random":
        rng = rng_for(seed, replicate, STREAM_SITES)
        if m.kind == CIRCLE:
            return rng.random(n)
        x = rng.standard_normal((n, m.dimension + 1))
        return x / np.linalg.norm(x, axis=1, keepdims=True)
    raise ValueError(f"unknown design {design!r}")


def sample_gp(m: ManifoldSpec, p: MaternParams, sites, seed: int, t: TruncationPolicy, replicate: int = 0) -> np.ndarray:
    """Exact draw from ``N(0, sigma2 Gamma)`` at ``sites``."""
    G, _ = correlation_matrix(m, p.nu, p.alpha, t, sites)
    return _draw(factorize(G).lower, p.sigma2, seed, replicate)


def _draw(L, sigma2, seed, replicate):
    u = rng_for(seed, replicate, STREAM_DRAWS).standard_normal(L.shape[0])
    return math.sqrt(sigma2) * (L @ u)


def _map_replicates(fn, R, threads):
    threads = _series.worker_threads() if not threads else int(threads)
    if threads <= 1 or R == 1:
        return [fn(r) for r in range(R)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(R)))


def _stamp(cfg, summary):
    summary = dict(summary)
    summary["seed"] = int(cfg.seed)
    summary["config_hash"] = cfg.config_hash()
    summary["design"] = cfg.design
    summary["manifold"] = cfg.manifold
    return summary


class _Fitter:
    """Factors needed to simulate under the truth and fit under ``alpha_1`` at one site set."""

    def __init__(self, cfg: ExperimentConfig, sites):
        m, t = cfg.spec, cfg.policy
        self.sites = sites
        G0, _ = correlation_matrix(m, cfg.nu, cfg.alpha_0, t, sites, threads=1)
        self.f0 = factorize(G0)
        self.L0 = self.f0.lower
        if cfg.alpha_1 == cfg.alpha_0:
            self.G1, self.f1 = G0, self.f0
        else:
            self.G1, _ = correlation_matrix(m, cfg.nu, cfg.alpha_1, t, sites, threads=1)
            self.f1 = factorize(self.G1)
        self.G0 = G0

    def fit(self, cfg, replicate):
        z = _draw(self.L0, cfg.sigma2_0, cfg.seed, replicate)
        return z, fit_with_factor(z, self.f1)


def _fitter_factory(cfg: ExperimentConfig, n: int):
    m = cfg.spec
    if cfg.design == "equally_spaced":
        shared = _Fitter(cfg, design_sites(m, cfg.design, n))
        return lambda r: shared
    return lambda r: _Fitter(cfg, design_sites(m, cfg.design, n, cfg.seed, r))


def _constants(cfg):
    m, t = cfg.spec, cfg.policy
    C0 = norm_constant(m, MaternParams(cfg.nu, cfg.alpha_0), t).value
    C1 = norm_constant(m, MaternParams(cfg.nu, cfg.alpha_1), t).value
    return C0, C1


def exp_consistency(cfg: ExperimentConfig) -> ExperimentReport:
    """MLE of the variance under a misspecified decay, scaled by ``C_{nu,alpha_1}``.

    Records one row per ``(n, replicate)``; the summary reports, per ``n``, the
    mean absolute relative error of ``sigma2_hat / C_1`` against the target
    ``sigma2_0 / C_0`` and the relative error of its replicate mean.
    """
    C0, C1 = _constants(cfg)
    target = cfg.sigma2_0 / C0
    records, per_n = [], []
    # each n gets a disjoint replicate-index block so streams never repeat
    for block, n in enumerate(cfg.n_schedule):
        get = _fitter_factory(cfg, n)

        def one(r, n=n, block=block):
            rep = block * cfg.replicates + r
            _, fit = get(r).fit(cfg, rep)
            scaled = fit.sigma2_hat / C1
            return {
                "n": n,
                "replicate": r,
                "sigma2_hat": fit.sigma2_hat,
                "scaled": scaled,
                "target": target,
                "rel_error": abs(scaled - target) / target,
            }

        rows = _map_replicates(one, cfg.replicates, cfg.threads)
        records.extend(rows)
        scaled = np.array([row["scaled"] for row in rows])
        per_n.append(
            {
                "n": n,
                "mean_scaled": float(scaled.mean()),
                "mean_abs_rel_error": float(np.mean(np.abs(scaled - target)) / target),
                "rel_error_of_mean": float(abs(scaled.mean() - target) / target),
            }
        )
    summary = {
        "target": target,
        "C_alpha0": C0,
        "C_alpha1": C1,
        "sigma2_1": cfg.sigma2_0 * C1 / C0,
        "per_n": per_n,
    }
    return ExperimentReport("consistency", records, _stamp(cfg, summary))


def exp_normality(cfg: ExperimentConfig, n: Optional[int] = None) -> ExperimentReport:
    """Replicates of ``sqrt(n) (sigma2_hat / sigma2_1 - 1)`` compared with ``N(0, 2)``."""
    n = int(cfg.n if n is None else n)
    C0, C1 = _constants(cfg)
    sigma2_1 = cfg.sigma2_0 * C1 / C0
    get = _fitter_factory(cfg, n)

    def one(r):
        _, fit = get(r).fit(cfg, r)
        return {
            "replicate": r,
            "sigma2_hat": fit.sigma2_hat,
            "statistic": math.sqrt(n) * (fit.sigma2_hat / sigma2_1 - 1.0),
        }

    records = _map_replicates(one, cfg.replicates, cfg.threads)
    s = np.array([row["statistic"] for row in records])
    summary = {"n": n, "sigma2_1": sigma2_1, "mean": float(s.mean())}
    summary["variance"] = float(s.var(ddof=1)) if s.size > 1 else float("nan")
    ks = stats.kstest(s, "norm", args=(0.0, math.sqrt(2.0)))
    summary["ks_statistic"] = float(ks.statistic)
    summary["ks_pvalue"] = float(ks.pvalue)
    counts, edges = np.histogram(s, bins=min(30, max(5, s.size // 10)))
    summary["histogram"] = {"edges": edges.tolist(), "counts": counts.tolist()}
    return ExperimentReport("normality", records, _stamp(cfg, summary))


def default_x0(m: ManifoldSpec):
    if m.kind == CIRCLE:
        return (0.1234,)
    v = np.array([0.3, -0.4, 0.866])
    return tuple(v / np.linalg.norm(v))


def exp_prediction(cfg: ExperimentConfig, x0=None) -> ExperimentReport:
    """Deterministic BLUP efficiency ratios and the sampled plug-in ratio, per ``n``.

    For each ``n``:

    * ``r1`` = E_0 (Zhat(alpha_1) - Z0)^2 / E_0 (Zhat(alpha_0) - Z0)^2;
    * ``r2`` = E_{sigma2_1, alpha_1} (Zhat(alpha_1) - Z0)^2 / E_0 (Zhat(alpha_0) - Z0)^2
      with ``sigma2_1 = sigma2_0 C_1 / C_0``;
    * ``r2_alpha0``: the first ratio with the numerator moment under ``(sigma2_1, alpha_0)``,
      which tends to ``sigma2_1 / sigma2_0`` rather than 1;
    * ``ratio_ii`` = E_{sigma2_1, alpha_1} (Zhat(alpha_1) - Z0)^2 / E_0 (Zhat(alpha_1) - Z0)^2;
    * ``sampled_mean``: replicate mean of the same ratio with ``sigma2_hat`` plugged in.
    """
    m, t = cfg.spec, cfg.policy
    x0 = make_point(m, default_x0(m) if x0 is None and cfg.x0 is None else (x0 if x0 is not None else cfg.x0))
    C0, C1 = _constants(cfg)
    sigma2_1 = cfg.sigma2_0 * C1 / C0
    records = []
    for block, n in enumerate(cfg.n_schedule):
        get = _fitter_factory(cfg, n)

        def one(r, block=block):
            fitter = get(r)
            if _coincident(m, x0, fitter.sites) is not None:
                # target is a design site: every MSE is zero and the ratios are undefined
                return 0.0, 0.0, 0.0, float("nan")
            g0 = cross_correlation(m, cfg.nu, cfg.alpha_0, t, [x0], fitter.sites)[0][0]
            g1 = cross_correlation(m, cfg.nu, cfg.alpha_1, t, [x0], fitter.sites)[0][0]
            w0, w1 = fitter.f0.solve(g0), fitter.f1.solve(g1)
            opt0 = cross_mse_from_weights(w0, fitter.G0, g0, cfg.sigma2_0)
            cross = cross_mse_from_weights(w1, fitter.G0, g0, cfg.sigma2_0)
            claimed = 1.0 - float(g1 @ w1)  # model MSE per unit variance
            _, fit = fitter.fit(cfg, block * cfg.replicates + r)
            return opt0, cross, claimed, fit.sigma2_hat * claimed / cross if cross > 0 else float("nan")

        outs = np.array(_map_replicates(one, cfg.replicates, cfg.threads))
        # deterministic parts are constant across replicates for a fixed design
        opt0, cross, claimed = (float(v) for v in outs[:, :3].mean(axis=0))
        sampled = outs[:, 3]
        records.append(
            {
                "n": n,
                "mse_truth_optimal": opt0,
                "mse_truth_misspecified": cross,
                "r1": cross / opt0 if opt0 > 0 else float("nan"),
                "r2": sigma2_1 * claimed / opt0 if opt0 > 0 else float("nan"),
                # the same first ratio with the moment taken under (sigma2_1, alpha_0)
                "r2_alpha0": sigma2_1 / cfg.sigma2_0 * cross / opt0 if opt0 > 0 else float("nan"),
                "ratio_ii": sigma2_1 * claimed / cross if cross > 0 else float("nan"),
                "sampled_mean": float(np.mean(sampled)),
            }
        )
    summary = {
        "x0": np.atleast_1d(x0).tolist(),
        "sigma2_1": sigma2_1,
        "r1_final": records[-1]["r1"],
        "sampled_mean_final": records[-1]["sampled_mean"],
        "r1_monotone_nonincreasing": bool(all(b["r1"] <= a["r1"] for a, b in zip(records, records[1:]))),
    }
    return ExperimentReport("prediction", records, _stamp(cfg, summary))


def exp_truncation(cfg: ExperimentConfig) -> ExperimentReport:
    """Observed ``max |k^N - k^{N_ref}|`` over random pairs on S^2 versus the closed-form bound."""
    m = cfg.spec
    if m.kind != SPHERE2:
        raise ValueError("the truncation experiment runs on sphere2")
    t = cfg.policy
    rng = rng_for(cfg.seed, 0, STREAM_SITES)
    x = rng.standard_normal((cfg.truncation_pairs, 3))
    y = rng.standard_normal((cfg.truncation_pairs, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    angles = 2.0 * np.arctan2(np.linalg.norm(x - y, axis=1), np.linalg.norm(x + y, axis=1))

    jobs = [(nu, a, N) for nu in cfg.truncation_nus for a in cfg.truncation_alphas for N in cfg.truncation_N]

    def one(i):
        nu, a, N = jobs[i]
        p = MaternParams(nu, a, cfg.truncation_sigma2)
        n_ref = min(100 * int(N), t.max_terms)
        err = np.abs(matern_kernel_partial(m, p, t, angles, int(N)) - matern_kernel_partial(m, p, t, angles, n_ref))
        bound = truncation_bound(p, int(N))
        return {
            "nu": float(nu),
            "alpha": float(a),
            "N": int(N),
            "N_ref": n_ref,
            "max_error": float(err.max()),
            "bound": bound,
            "violated": int(err.max() > bound),
        }

    records = _map_replicates(one, len(jobs), cfg.threads)
    monotone = {}
    for nu in cfg.truncation_nus:
        for a in cfg.truncation_alphas:
            errs = [r["max_error"] for r in records if r["nu"] == nu and r["alpha"] == a]
            monotone[f"nu={nu},alpha={a}"] = bool(all(e2 <= e1 for e1, e2 in zip(errs, errs[1:])))
    summary = {
        "violations": int(sum(r["violated"] for r in records)),
        "cases": len(records),
        "error_monotone_in_N": monotone,
    }
    return ExperimentReport("truncation", records, _stamp(cfg, summary))


EXPERIMENTS = {
    "consistency": exp_consistency,
    "normality": exp_normality,
    "prediction": exp_prediction,
    "truncation": exp_truncation,
}
