"""Small dense solvers in extended precision.

LAPACK has no long double path, and the moment systems here are at most
8x8, so plain Gaussian elimination is both adequate and cheap.
"""

import numpy as np

LD = np.longdouble


def cholesky(a):
    """Lower Cholesky factor of a symmetric matrix, or None if not PD."""
    a = np.array(a, dtype=LD)
    n = a.shape[0]
    low = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - np.dot(low[j, :j], low[j, :j])
        if not d > 0:
            return None
        low[j, j] = np.sqrt(d)
        for i in range(j + 1, n):
            low[i, j] = (a[i, j] - np.dot(low[i, :j], low[j, :j])) / low[j, j]
    return low


def cholesky_solve(low, b):
    b = np.array(b, dtype=LD)
    n = len(b)
    y = np.zeros(n, dtype=LD)
    for i in range(n):
        y[i] = (b[i] - np.dot(low[i, :i], y[:i])) / low[i, i]
    x = np.zeros(n, dtype=LD)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - np.dot(low[i + 1:, i], x[i + 1:])) / low[i, i]
    return x


def lu_solve(a, b):
    """Solve ``a x = b`` with partial pivoting; works for real or complex long double."""
    dtype = np.result_type(np.asarray(a).dtype, np.asarray(b).dtype, LD)
    a = np.array(a, dtype=dtype)
    b = np.array(b, dtype=dtype)
    n = len(b)
    for j in range(n):
        p = j + int(np.argmax(np.abs(a[j:, j])))
        if a[p, j] == 0:
            raise np.linalg.LinAlgError("singular matrix")
        if p != j:
            a[[j, p]] = a[[p, j]]
            b[[j, p]] = b[[p, j]]
        f = a[j + 1:, j] / a[j, j]
        a[j + 1:, j:] -= np.outer(f, a[j, j:])
        b[j + 1:] -= f * b[j]
    x = np.zeros(n, dtype=dtype)
    for j in range(n - 1, -1, -1):
        x[j] = (b[j] - np.dot(a[j, j + 1:], x[j + 1:])) / a[j, j]
    return x


def det(a):
    """Determinant by pivoted elimination in long double."""
    a = np.array(a, dtype=LD)
    n = a.shape[0]
    out = LD(1)
    for j in range(n):
        p = j + int(np.argmax(np.abs(a[j:, j])))
        if a[p, j] == 0:
            return LD(0)
        if p != j:
            a[[j, p]] = a[[p, j]]
            out = -out
        out *= a[j, j]
        f = a[j + 1:, j] / a[j, j]
        a[j + 1:, j:] -= np.outer(f, a[j, j:])
    return out
