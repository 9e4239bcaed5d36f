"""Backend selection for the series kernels.

The compiled extension is used when it imports; ``MANIFOLDGP_PURE=1`` forces
the numpy fallback.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _fallback

if os.environ.get("MANIFOLDGP_PURE", "") not in ("", "0"):
    _core = None
else:
    try:
        from . import _core
    except ImportError:  # extension not built
        _core = None

BACKEND = "compiled" if _core is not None else "python"

_CHUNK = 2048


def _impl(name, backend=None):
    backend = backend or BACKEND
    if backend == "compiled":
        if _core is None:
            raise RuntimeError("compiled backend unavailable")
        return getattr(_core, name)
    return getattr(_fallback, name)


def worker_threads() -> int:
    """Thread cap from ``MM_THREADS`` (0 or unset = number of CPUs)."""
    try:
        n = int(os.environ.get("MM_THREADS", "0"))
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n


def series_sum(name, coef, x, threads=None, backend=None):
    """Evaluate ``sum_n coef[n] * basis_n(x_i)`` for ``name`` in {legendre, cosine}.

    Work is chunked over points; each entry's summation order is fixed, so the
    output is bitwise independent of ``threads``.
    """
    fn = _impl(f"{name}_sum", backend)
    coef = np.ascontiguousarray(coef, dtype=float)
    x = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1))
    if x.size == 0:
        return x.copy()
    threads = worker_threads() if threads is None else max(1, int(threads))
    if threads == 1 or x.size <= _CHUNK:
        return np.asarray(fn(coef, x))
    chunks = [x[i:i + _CHUNK] for i in range(0, x.size, _CHUNK)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: np.asarray(fn(coef, c)), chunks))
    return np.concatenate(parts)
