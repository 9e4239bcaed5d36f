"""Pure-numpy versions of the compiled series loops in ``_core``.

Same recurrences and the same per-entry summation order as the compiled code,
vectorized across evaluation points instead of looping over them.
"""

import numpy as np


def legendre_sum(coef, z):
    coef = np.ascontiguousarray(coef, dtype=float)
    z = np.ascontiguousarray(z, dtype=float)
    acc = np.full_like(z, coef[0])
    if coef.size == 1:
        return acc
    p0 = np.ones_like(z)
    p1 = z.copy()
    acc += coef[1] * p1
    for k in range(1, coef.size - 1):
        p2 = ((2 * k + 1) * z * p1 - k * p0) / (k + 1)
        acc += coef[k + 1] * p2
        p0, p1 = p1, p2
    return acc


def cosine_sum(coef, theta):
    coef = np.ascontiguousarray(coef, dtype=float)
    theta = np.ascontiguousarray(theta, dtype=float)
    c1 = np.cos(theta)
    s1 = np.sin(theta)
    c = np.ones_like(theta)
    s = np.zeros_like(theta)
    acc = np.full_like(theta, coef[0])
    for k in range(1, coef.size):
        c, s = c * c1 - s * s1, s * c1 + c * s1
        acc += coef[k] * c
    return acc
