"""Recover a discrete measure from its moments.

All moment algebra runs in long double on moments rescaled by
``s = gamma_1 / gamma_0``: in double precision the Hankel systems of
five-atom measures lose most of their digits before the roots are found.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from . import _ldlinalg
from .errors import (
    ComplexRootError,
    ConvergenceError,
    DomainError,
    InversionError,
    LengthError,
    NegativeWeightError,
    NotPositiveDefiniteError,
    SupportError,
)
from .psd import DiscretePSD, hankel

LD = np.longdouble
CLD = np.clongdouble
IMAG_TOL = 1e-8
NEWTON_TOL = 1e-13


@dataclass(frozen=True)
class Inversion:
    psd: DiscretePSD
    condition: float


def _scaled(moments, count):
    g = np.asarray(moments, dtype=LD)
    if g.size < count:
        raise LengthError(f"need {count} moments, got {g.size}")
    g = g[:count]
    if not g[0] > 0:
        raise NotPositiveDefiniteError("gamma_0 must be positive")
    s = g[1] / g[0] if g.size > 1 and g[1] > 0 else LD(1)
    return g / s ** np.arange(count, dtype=LD), s


def _poly_eval(coef, z):
    # monic polynomial z^k + sum coef[j] z^j and its derivative, by Horner
    p = np.ones_like(z)
    dp = np.zeros_like(z)
    for c in coef[::-1]:
        dp = dp * z + p
        p = p * z + c
    return p, dp


def _aberth(coef, z, iters=60):
    """Polish all roots at once; the repulsion term keeps close roots apart."""
    z = z.astype(CLD)
    k = z.size
    for _ in range(iters):
        p, dp = _poly_eval(coef, z)
        ratio = p / dp
        diff = z[:, None] - z[None, :]
        diff[np.arange(k), np.arange(k)] = 1
        rep = (1 / diff).sum(axis=1) - 1  # diagonal contributed exactly 1
        step = ratio / (1 - ratio * rep)
        z = z - step
        if np.all(np.abs(step) <= 1e-18 * np.maximum(1, np.abs(z))):
            break
    return z


def invert(moments, k: int) -> Inversion:
    """The ``k``-atom measure with moments ``gamma_0..gamma_{2k-1}``, plus the
    2-norm condition number of its (rescaled) Hankel matrix."""
    if k < 1:
        raise DomainError("k must be positive")
    g, s = _scaled(moments, 2 * k)
    gam = hankel(g, k)
    low = _ldlinalg.cholesky(gam)
    if low is None:
        raise NotPositiveDefiniteError(f"Hankel matrix of order {k} is not positive definite")
    cond = float(np.linalg.cond(gam.astype(float)))
    coef = _ldlinalg.cholesky_solve(low, -g[k : 2 * k])
    if k == 1:
        roots = np.array([-coef[0]], dtype=CLD)
    else:
        comp = np.zeros((k, k))
        comp[1:, :-1] = np.eye(k - 1)
        comp[:, -1] = -coef.astype(float)
        roots = _aberth(coef, np.linalg.eigvals(comp))
    re = roots.real.astype(LD)
    if np.any(np.abs(roots.imag) > IMAG_TOL * (1 + np.abs(re))):
        raise ComplexRootError(f"characteristic polynomial has complex roots {roots.astype(complex)}")
    b = np.sort(re)
    if k > 1 and np.any(np.diff(b) <= 1e-12 * np.abs(b[1:])):
        raise InversionError("roots coincide after polishing", stage="roots")
    if b[0] <= 0:
        raise SupportError(f"recovered atom {float(b[0] * s)!r} is not positive")
    vand = b[None, :] ** np.arange(k, dtype=LD)[:, None]
    w = _ldlinalg.lu_solve(vand, g[:k])
    if np.any(w <= 0):
        raise NegativeWeightError(f"recovered weights {w.astype(float)} are not all positive")
    return Inversion(DiscretePSD((b * s).astype(float), w.astype(float)), cond)


def moments_to_measure(moments, k: int) -> DiscretePSD:
    """The unique ``k``-atom measure with moments ``gamma_0..gamma_{2k-1}``."""
    return invert(moments, k).psd


# -- Newton solvers for partially known measures ------------------------------


def _plain_newton(resid, jac, x, lower, tol, max_iter=30):
    for _ in range(max_iter):
        f = resid(x)
        if not np.all(np.isfinite(f)):
            return None
        if np.max(np.abs(f)) < tol:
            return x
        try:
            x = x + _ldlinalg.lu_solve(jac(x), -f)
        except np.linalg.LinAlgError:
            return None
        if not np.all(x > lower):
            return None
    return None


def _newton(resid, jac, x0, lower, tol=NEWTON_TOL, max_iter=200):
    """Newton in long double; ``x`` stays strictly above ``lower``.

    Undamped steps come first: near a root the first step often overshoots
    before converging quadratically, which a monotone line search would
    reject. If that fails, steps from ``x0`` are halved until the sum of
    squared residuals decreases. Convergence is judged on the largest
    residual.
    """
    x = np.array(x0, dtype=LD)
    with np.errstate(all="ignore"):
        quick = _plain_newton(resid, jac, x, lower, tol)
    if quick is not None:
        return quick, float(np.max(np.abs(resid(quick))))
    f = resid(x)
    merit = np.dot(f, f)
    for _ in range(max_iter):
        if np.max(np.abs(f)) < tol:
            break
        try:
            step = _ldlinalg.lu_solve(jac(x), -f)
        except np.linalg.LinAlgError:
            break
        t = LD(1)
        for _ in range(40):
            xn = x + t * step
            if np.all(xn > lower):
                fn = resid(xn)
                mn = np.dot(fn, fn)
                if mn < merit:
                    break
            t /= 2
        else:
            break
        x, f, merit = xn, fn, mn
    norm = float(np.max(np.abs(f)))
    if norm < tol:
        return x, norm
    raise ConvergenceError("Newton iteration did not converge", residual=norm)


def _spread_seed(k):
    # atoms spread over [0.2, 1.8] times the mean on the rescaled axis
    return np.linspace(0.2, 1.8, k) if k > 1 else np.array([1.0])


def solve_known_weights(moments, weights, k: int | None = None) -> DiscretePSD:
    """Atoms of a measure with given weights from ``gamma_1..gamma_k``."""
    w = np.asarray(weights, dtype=LD)
    k = w.size if k is None else k
    if w.size != k or k < 1:
        raise DomainError("need exactly k weights")
    if np.any(w <= 0):
        raise DomainError("known weights must be positive")
    g = np.asarray(moments, dtype=LD)
    if g.size < k + 1:
        raise LengthError(f"need gamma_1..gamma_{k}, got {g.size} moments")
    if not g[1] > 0:
        raise SupportError("gamma_1 must be positive")
    if k == 1:
        return DiscretePSD([float(g[1] / w[0])], [float(w[0])])
    s = g[1] / w.sum()
    target = g[1 : k + 1] / s ** np.arange(1, k + 1, dtype=LD)
    orders = np.arange(1, k + 1)
    # equations are divided by their targets so every order counts equally
    norm = np.abs(target)

    def resid(t):
        return ((w[None, :] * t[None, :] ** orders[:, None]).sum(axis=1) - target) / norm

    def jac(t):
        return orders[:, None] * w[None, :] * t[None, :] ** (orders[:, None] - 1) / norm[:, None]

    # second pass: atoms as cumulative sums of exp(y), so every iterate is
    # positive and sorted; its basins differ enough to rescue most misses
    def atoms(y):
        return np.cumsum(np.exp(y))

    def resid_y(y):
        with np.errstate(over="ignore", invalid="ignore"):
            return resid(atoms(y))

    def jac_y(y):
        with np.errstate(over="ignore", invalid="ignore"):
            jt = jac(atoms(y))
            return np.cumsum(jt[:, ::-1], axis=1)[:, ::-1] * np.exp(y)[None, :]

    seeds = []
    if g.size >= 2 * k:
        try:
            seeds.append(invert(g, k).psd.atoms / float(s))
        except InversionError:
            pass
    seeds.extend(_moment_matched_seeds(w, float(target[1])))
    try:
        return _multistart(resid, jac, seeds, lambda x: _accept_atoms(x, w, s))
    except ConvergenceError as err:
        first = err.residual
    ys = [np.log(np.diff(t, prepend=0.0)) for t in seeds if np.all(np.diff(t, prepend=0.0) > 0)]
    try:
        return _multistart(resid_y, jac_y, ys, lambda y: _accept_atoms(atoms(y), w, s), lower=-np.inf)
    except ConvergenceError as err:
        raise ConvergenceError(str(err), residual=min(first, err.residual)) from None


def _moment_matched_seeds(w, second):
    """Sorted starting atoms with the known weights, unit weighted mean and the
    weighted variance implied by the second (rescaled) moment."""
    w = np.asarray(w, dtype=float)
    mass = w.sum()
    sd = np.sqrt(max(second / mass - 1.0, 1e-4))
    mid = (np.cumsum(w) - w / 2) / mass
    shapes = [ndtri(mid), mid - 0.5, np.log(mid / (1 - mid))]
    seeds = []
    for z in shapes:
        z = z - np.dot(w, z) / mass
        spread = np.sqrt(np.dot(w, z**2) / mass)
        base = 1.0 + sd * z / spread if spread > 0 else np.ones_like(z)
        base = np.maximum(base, 0.02)
        seeds.append(base)
    seeds.extend(_jittered(seeds[0], 12))
    # sorted draws below the largest atom any single weight allows
    rng = np.random.default_rng(1)
    top = np.sqrt(second / w.min())
    seeds.extend(np.sort(rng.uniform(0.02, top, (60, w.size)), axis=1))
    return seeds


def _jittered(base, count, seed=0):
    rng = np.random.default_rng(seed)
    return [base * np.exp(0.3 * rng.standard_normal(base.size)) for _ in range(count)]


def _accept_atoms(t, w, s):
    if np.any(np.diff(t) <= 1e-10 * np.abs(t[1:])):
        return None
    return DiscretePSD((t * s).astype(float), w.astype(float))


def _multistart(resid, jac, seeds, accept, lower=0.0):
    best = np.inf
    for x0 in seeds:
        try:
            x, _ = _newton(resid, jac, x0, lower=LD(lower), max_iter=60)
        except ConvergenceError as err:
            best = min(best, err.residual)
            continue
        out = accept(x)
        if out is not None:
            return out
    raise ConvergenceError("no start point converged to an admissible measure", residual=best)


def solve_partial_weights(moments, known_mask, known_values, k: int | None = None) -> DiscretePSD:
    """A ``k``-atom measure with the weights flagged in ``known_mask`` fixed to
    ``known_values`` (entries where the mask is false are ignored).

    With ``u`` unknowns (all atoms plus the free weights) the moment
    equations ``l = 0..u-1`` are used, or ``l = 1..u`` when every weight is
    known.
    """
    mask = [bool(x) for x in known_mask]
    k = len(mask) if k is None else k
    if len(mask) != k or len(known_values) != k or k < 1:
        raise DomainError("mask and values need one entry per atom")
    kw = [float(v) if m else None for m, v in zip(mask, known_values)]
    free = [i for i, x in enumerate(kw) if x is None]
    if len(free) == k:
        return moments_to_measure(moments, k)
    if not free:
        return solve_known_weights(moments, kw, k)
    fixed = np.array([0 if x is None else x for x in kw], dtype=LD)
    if np.any(fixed[[i for i in range(k) if i not in free]] <= 0):
        raise DomainError("known weights must be positive")
    u = k + len(free)
    g = np.asarray(moments, dtype=LD)
    if g.size < u:
        raise LengthError(f"{u} unknowns need gamma_0..gamma_{u - 1}, got {g.size} moments")
    if not g[0] > 0 or not g[1] > 0:
        raise SupportError("gamma_0 and gamma_1 must be positive")
    s = g[1] / g[0]
    orders = np.arange(u)
    target = g[:u] / s ** orders.astype(LD)
    free_idx = np.array(free)

    def unpack(x):
        w = fixed.copy()
        w[free_idx] = x[k:]
        return x[:k], w

    def resid(x):
        t, w = unpack(x)
        return (w[None, :] * t[None, :] ** orders[:, None]).sum(axis=1) - target

    def jac(x):
        t, w = unpack(x)
        powm1 = np.where(orders[:, None] > 0, t[None, :] ** np.maximum(orders[:, None] - 1, 0), 0)
        da = orders[:, None] * w[None, :] * powm1
        dw = t[None, free_idx] ** orders[:, None]
        return np.hstack([da, dw])

    mass_left = max(float(g[0] - fixed.sum()), 1e-3 * float(g[0]))
    base_w = np.full(len(free), mass_left / len(free))
    seeds = []
    if g.size >= 2 * k:
        try:
            un = invert(g, k).psd
            seeds.append(np.concatenate([un.atoms / float(s), un.weights[free_idx]]))
        except InversionError:
            pass
    base = np.concatenate([_spread_seed(k), base_w])
    seeds.append(base)
    seeds.extend(_jittered(base, 8 - len(seeds)))

    def accept(x):
        t, w = unpack(x)
        if np.any(w <= 0):
            return None
        return _accept_atoms(t, w, s)

    return _multistart(resid, jac, seeds, accept)
