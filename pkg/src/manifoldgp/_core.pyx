# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for spectral series evaluation.

Each output entry is summed in a fixed order (n = 0, 1, ..., N), so results are
independent of how callers split the work across threads.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


cdef enum:
    BLOCK = 64


def legendre_sum(const double[::1] coef, const double[::1] z):
    """sum_n coef[n] * P_n(z_i), Legendre values by the forward Bonnet recurrence."""
    cdef Py_ssize_t N = coef.shape[0]
    cdef Py_ssize_t m = z.shape[0]
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t j, k, b
    cdef Py_ssize_t i0 = 0
    cdef double p0[BLOCK]
    cdef double p1[BLOCK]
    cdef double acc[BLOCK]
    cdef double p2, ck
    with nogil:
        # a block of independent points per term keeps the pipeline full
        while i0 < m:
            b = m - i0
            if b > BLOCK:
                b = BLOCK
            for j in range(b):
                p0[j] = 1.0
                acc[j] = coef[0]
            if N > 1:
                ck = coef[1]
                for j in range(b):
                    p1[j] = z[i0 + j]
                    acc[j] = acc[j] + ck * p1[j]
                for k in range(1, N - 1):
                    ck = coef[k + 1]
                    for j in range(b):
                        p2 = ((2 * k + 1) * z[i0 + j] * p1[j] - k * p0[j]) / (k + 1)
                        acc[j] = acc[j] + ck * p2
                        p0[j] = p1[j]
                        p1[j] = p2
            for j in range(b):
                out[i0 + j] = acc[j]
            i0 += BLOCK
    return out_arr


def cosine_sum(const double[::1] coef, const double[::1] theta):
    """sum_n coef[n] * cos(n theta_i), cosines by the rotation recurrence."""
    cdef Py_ssize_t N = coef.shape[0]
    cdef Py_ssize_t m = theta.shape[0]
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t j, k, b
    cdef Py_ssize_t i0 = 0
    cdef double c1[BLOCK]
    cdef double s1[BLOCK]
    cdef double c[BLOCK]
    cdef double s[BLOCK]
    cdef double acc[BLOCK]
    cdef double cn, ck
    with nogil:
        while i0 < m:
            b = m - i0
            if b > BLOCK:
                b = BLOCK
            for j in range(b):
                c1[j] = cos(theta[i0 + j])
                s1[j] = sin(theta[i0 + j])
                c[j] = 1.0
                s[j] = 0.0
                acc[j] = coef[0]
            for k in range(1, N):
                ck = coef[k]
                for j in range(b):
                    cn = c[j] * c1[j] - s[j] * s1[j]
                    s[j] = s[j] * c1[j] + c[j] * s1[j]
                    c[j] = cn
                    acc[j] = acc[j] + ck * c[j]
            for j in range(b):
                out[i0 + j] = acc[j]
            i0 += BLOCK
    return out_arr
