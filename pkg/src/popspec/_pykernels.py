"""Pure numpy implementations of the per-sample kernels.

These mirror ``_ckernels.pyx`` exactly in contract; the compiled module is
preferred when it is importable (see ``kernels.py``).
"""

import numpy as np


def companion_derivatives(x, lambdas, n, order):
    """Derivatives ``s̲_n^{(j)}(x_r)`` for ``j = 0..order`` at real points.

    Returns an array of shape ``(len(x), order + 1)``.
    """
    x = np.ascontiguousarray(x, dtype=float)
    lam = np.ascontiguousarray(lambdas, dtype=float)
    v = lam.size
    beta = 1.0 - v / n
    t = 1.0 / (lam[None, :] - x[:, None])
    inv_x = 1.0 / x
    out = np.empty((x.size, order + 1))
    tp = t.copy()
    xp = inv_x.copy()
    fact = 1.0
    for j in range(order + 1):
        if j:
            fact *= j
            tp *= t
            xp *= inv_x
        sign = -1.0 if j % 2 else 1.0
        out[:, j] = -beta * sign * fact * xp + fact / n * tp.sum(axis=1)
    return out


def _g(u, lam, n):
    # sum_i lam_i / (lam_i - u) - n, increasing in u between poles
    return (lam[None, :] / (lam[None, :] - u[:, None])).sum(axis=1) - n


def _gprime(u, lam):
    return (lam[None, :] / (lam[None, :] - u[:, None]) ** 2).sum(axis=1)


def companion_zeros(lambdas, n, max_iter=200):
    """Real zeros ``mu_1 < lambda_1 < mu_2 < ... < mu_v < lambda_v`` of ``s̲_n``.

    ``mu_1`` is the root in ``(0, lambda_1)`` when ``v < n`` and is set to 0
    when ``v == n`` (no zero of ``s̲_n`` lies below ``lambda_1`` then).
    Uses a vectorised safeguarded Newton-bisection over all brackets.
    """
    lam = np.ascontiguousarray(lambdas, dtype=float)
    v = lam.size
    lo = np.empty(v)
    hi = lam * (1.0 - 1e-15)
    lo[1:] = lam[:-1] * (1.0 + 1e-15)
    lo[0] = 1e-12 * lam[0]
    active = np.ones(v, dtype=bool)
    if v >= n:
        active[0] = False
    u = 0.5 * (lo + hi)
    mu = np.zeros(v)
    idx = np.flatnonzero(active)
    a, b, u = lo[idx], hi[idx], u[idx]
    done = np.zeros(idx.size, dtype=bool)
    for _ in range(max_iter):
        live = ~done
        if not live.any():
            break
        uu = u[live]
        g = _g(uu, lam, n)
        neg = g < 0
        aa, bb = a[live], b[live]
        aa = np.where(neg, uu, aa)
        bb = np.where(neg, bb, uu)
        step = g / _gprime(uu, lam)
        cand = uu - step
        bad = ~((cand > aa) & (cand < bb)) | ~np.isfinite(cand)
        cand = np.where(bad, 0.5 * (aa + bb), cand)
        cand = np.where(g == 0, uu, cand)
        conv = (np.abs(cand - uu) <= 4e-16 * np.abs(cand)) | (bb - aa <= 4e-16 * bb) | (g == 0)
        a[live], b[live], u[live] = aa, bb, cand
        done[live] = conv
    mu[idx] = u
    return mu

