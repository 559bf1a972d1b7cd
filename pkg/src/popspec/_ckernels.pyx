# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-sample kernels; contract identical to ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite

cnp.import_array()


def companion_derivatives(x, lambdas, long n, int order):
    cdef const double[::1] xs = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] lam = np.ascontiguousarray(lambdas, dtype=np.float64)
    cdef Py_ssize_t nx = xs.shape[0], v = lam.shape[0]
    cdef Py_ssize_t r, i
    cdef int j
    out_arr = np.zeros((nx, order + 1), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] acc = np.zeros(order + 1, dtype=np.float64)
    cdef double beta = 1.0 - <double>v / <double>n
    cdef double t, tp, inv_x, xp, fact, sign

    for r in range(nx):
        for j in range(order + 1):
            acc[j] = 0.0
        for i in range(v):
            t = 1.0 / (lam[i] - xs[r])
            tp = t
            for j in range(order + 1):
                acc[j] += tp
                tp *= t
        inv_x = 1.0 / xs[r]
        xp = inv_x
        fact = 1.0
        for j in range(order + 1):
            if j > 0:
                fact *= j
                xp *= inv_x
            sign = -1.0 if (j % 2) else 1.0
            out[r, j] = -beta * sign * fact * xp + fact / n * acc[j]
    return out_arr


cdef inline void _g_and_slope(double u, const double[::1] lam, long n,
                              double* g, double* dg) nogil:
    cdef Py_ssize_t i
    cdef double d, q, s0 = 0.0, s1 = 0.0
    for i in range(lam.shape[0]):
        d = lam[i] - u
        q = lam[i] / d
        s0 += q
        s1 += q / d
    g[0] = s0 - n
    dg[0] = s1


def companion_zeros(lambdas, long n, int max_iter=200):
    cdef const double[::1] lam = np.ascontiguousarray(lambdas, dtype=np.float64)
    cdef Py_ssize_t v = lam.shape[0], i
    mu_arr = np.zeros(v, dtype=np.float64)
    cdef double[::1] mu = mu_arr
    cdef double a, b, u, g, dg, cand
    cdef int it
    cdef Py_ssize_t first = 1 if v >= n else 0

    with nogil:
        for i in range(first, v):
            if i == 0:
                a = 1e-12 * lam[0]
            else:
                a = lam[i - 1] * (1.0 + 1e-15)
            b = lam[i] * (1.0 - 1e-15)
            u = 0.5 * (a + b)
            for it in range(max_iter):
                _g_and_slope(u, lam, n, &g, &dg)
                if g == 0.0:
                    break
                if g < 0.0:
                    a = u
                else:
                    b = u
                cand = u - g / dg
                if not (cand > a and cand < b) or not isfinite(cand):
                    cand = 0.5 * (a + b)
                if fabs(cand - u) <= 4e-16 * fabs(cand) or b - a <= 4e-16 * b:
                    u = cand
                    break
                u = cand
            mu[i] = u
    return mu_arr
