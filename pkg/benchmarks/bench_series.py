"""Compare the compiled and pure-Python backends on the kernel series sums.

Usage: python3 benchmarks/bench_series.py [--terms N] [--points P] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from manifoldgp import _series


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--terms", type=int, default=4096)
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    coef = 1.0 / (1.0 + np.arange(args.terms)) ** 2
    inputs = {"legendre": rng.uniform(-1, 1, args.points), "cosine": rng.uniform(0, np.pi, args.points)}
    backends = ["python"] + (["compiled"] if _series._core is not None else [])
    print(f"terms={args.terms} points={args.points} threads={args.threads} (best of {args.repeat})")
    print(f"{'series':<10}{'backend':<10}{'seconds':>12}{'speedup':>10}")
    for name, x in inputs.items():
        base = None
        for b in backends:

            def run():
                return _series.series_sum(name, coef, x, threads=args.threads, backend=b)

            t = min(timeit.repeat(run, number=1, repeat=args.repeat))
            base = base or t
            print(f"{name:<10}{b:<10}{t:>12.4f}{base / t:>9.1f}x")
    if len(backends) == 1:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
