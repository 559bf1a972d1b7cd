"""Marchenko-Pastur forward model for a discrete population spectrum.

Everything here is driven by the inverse map of the companion Stieltjes
transform,

    z(s) = -1/s + c * sum_j w_j a_j / (1 + a_j s),

and by its real-line reparametrisation ``u = -1/s``:

    x(u) = u * (1 + c * sum_j w_j a_j / (u - a_j)),
    x'(u) = 1 - c * sum_j w_j a_j**2 / (u - a_j)**2.

``x'(u)`` has the sign of ``z'(s)`` and ``phi(u) = sum_j w_j a_j**2/(u-a_j)**2``
is convex between consecutive atoms, which gives guaranteed brackets for
every support edge.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import brentq

from .errors import DomainError, NumericalError
from .psd import DiscretePSD

DENSITY_EPS = 1e-9
MERGE_RTOL = 1e-6
_REAL_TOL = 1e-8


def _params(H: DiscretePSD):
    return H.atoms, H.weights


# -- companion transform ------------------------------------------------------


def companion_z(s, H: DiscretePSD, c: float):
    """Inverse companion map ``z(s)``; vectorised over ``s``."""
    a, w = _params(H)
    s = np.asarray(s)
    den = 1.0 + np.multiply.outer(s, a)
    if np.any(s == 0) or np.any(den == 0):
        raise DomainError("s sits on a pole of z(s) (s = 0 or s = -1/a_j)")
    out = -1.0 / s + c * np.sum(w * a / den, axis=-1)
    return out[()] if out.ndim == 0 else out


def companion_z_prime(s, H: DiscretePSD, c: float, order: int = 1):
    """First or second derivative of ``z(s)``."""
    a, w = _params(H)
    s = np.asarray(s)
    den = 1.0 + np.multiply.outer(s, a)
    if order == 1:
        out = 1.0 / s**2 - c * np.sum(w * a**2 / den**2, axis=-1)
    elif order == 2:
        out = -2.0 / s**3 + 2.0 * c * np.sum(w * a**3 / den**3, axis=-1)
    else:
        raise DomainError("only orders 1 and 2 are provided")
    return out[()] if out.ndim == 0 else out


def _cleared_parts(H: DiscretePSD, c: float):
    """``(base, slope)`` with the cleared polynomial equal to ``base + z * slope``."""
    a, w = _params(H)
    q = np.array([1.0 + 0j])
    for aj in a:
        q = npoly.polymul(q, [1.0, aj])
    acc = np.zeros(len(a), dtype=complex)
    for j, aj in enumerate(a):
        others = np.array([1.0 + 0j])
        for i, ai in enumerate(a):
            if i != j:
                others = npoly.polymul(others, [1.0, ai])
        acc = npoly.polyadd(acc, w[j] * aj * others)
    # z s Q(s) + Q(s) - c s sum_j w_j a_j prod_{i != j}(1 + a_i s) = 0
    slope = npoly.polymulx(q)
    base = np.zeros(slope.size, dtype=complex)
    base[: q.size] += q
    tail = c * npoly.polymulx(acc)
    base[: tail.size] -= tail
    return base, slope


def _cleared_polynomial(z, H: DiscretePSD, c: float):
    """Coefficients (increasing) of ``s * prod(1 + a_j s) * (z(s) - z)``."""
    base, slope = _cleared_parts(H, c)
    return npoly.polyadd(base, z * slope)


def _solve_upper(zs, H: DiscretePSD, c: float) -> np.ndarray:
    """``s̲(z)`` for many ``z`` with ``Im z > 0``: one batched companion
    eigensolve, a vectorised Newton polish, then the upper-half-plane root."""
    zs = np.asarray(zs, dtype=complex)
    base, slope = _cleared_parts(H, c)
    coef = base[None, :] + zs[:, None] * slope[None, :]
    deg = coef.shape[1] - 1
    comp = np.zeros((zs.size, deg, deg), dtype=complex)
    comp[:, 1:, :-1] = np.eye(deg - 1)
    comp[:, :, -1] = -coef[:, :-1] / coef[:, -1:]
    roots = np.linalg.eigvals(comp)
    a, w = _params(H)
    for _ in range(4):
        den = 1.0 + roots[..., None] * a
        f = -1.0 / roots + c * np.sum(w * a / den, axis=-1) - zs[:, None]
        d = 1.0 / roots**2 - c * np.sum(w * a**2 / den**2, axis=-1)
        roots = roots - f / d
    best = roots[np.arange(zs.size), np.argmax(roots.imag, axis=1)]
    if np.any(best.imag <= 0):
        raise DomainError("no root of z(s) = z in the upper half-plane")
    return best


def _polish(s, z, H, c, iters=8):
    for _ in range(iters):
        try:
            f = companion_z(s, H, c) - z
            d = companion_z_prime(s, H, c)
        except DomainError:
            return s
        if d == 0 or not np.isfinite(d):
            return s
        step = f / d
        s = s - step
        if abs(step) <= 1e-16 * abs(s):
            break
    return s


def solve_companion(z, H: DiscretePSD, c: float) -> complex:
    """The companion Stieltjes transform ``s̲(z)`` of the limiting ESD.

    Off the real axis the unique root of the cleared degree-(k+1) polynomial
    with ``Im(z) * Im(s) > 0`` is returned. For real ``z`` outside the
    support the root must be real with ``z'(s) > 0``.
    """
    z = complex(z)
    if z == 0:
        raise DomainError("z = 0 is excluded")
    roots = npoly.polyroots(_cleared_polynomial(z, H, c))
    roots = np.array([_polish(r, z, H, c) for r in roots if r != 0])
    if z.imag != 0:
        sign = math.copysign(1.0, z.imag)
        best = roots[np.argmax(sign * roots.imag)]
        if sign * best.imag <= 0:
            raise DomainError(f"no root of z(s) = {z} in the half-plane Im(z) Im(s) > 0")
        return complex(best)
    real = roots[np.abs(roots.imag) <= _REAL_TOL * (1.0 + np.abs(roots.real))].real
    real = real[np.abs(1.0 + np.multiply.outer(real, H.atoms)).min(axis=-1) > 0] if real.size else real
    admissible = [s for s in real if companion_z_prime(s, H, c) > 0]
    if not admissible:
        raise DomainError(
            f"z = {z.real!r} is inside the support: no real root with z'(s) > 0"
        )
    if len(admissible) > 1:
        # Theory allows one increasing-branch root; keep the best-conditioned.
        admissible.sort(key=lambda s: -companion_z_prime(s, H, c))
    return complex(admissible[0], 0.0)


# -- support ------------------------------------------------------------------


def _x_of_u(u, a, w, c):
    return u * (1.0 + c * np.sum(w * a / (u - a)))


def _xprime(u, a, w, c):
    return 1.0 - c * np.sum(w * a**2 / (u - a) ** 2)


def _dphi(u, a, w):
    return -2.0 * np.sum(w * a**2 / (u - a) ** 3)


def _root(f, lo, hi, scale):
    return brentq(f, lo, hi, xtol=1e-15 * scale, rtol=4 * np.finfo(float).eps, maxiter=500)


def _increasing_branches(H: DiscretePSD, c: float):
    """Maximal ``u``-intervals on which ``x(u)`` increases, in order.

    Each entry is ``(u_lo, u_hi)``; infinite ends are ``±inf``. The images of
    these branches are exactly the gaps of the support on the real line.
    """
    a, w = _params(H)
    scale = float(a[-1])
    tiny = 1e-13
    f = lambda u: _xprime(u, a, w, c)  # noqa: E731
    branches = []

    if abs(c - 1.0) <= 1e-14:
        branches.append((-math.inf, 0.0))
    elif c > 1.0:
        lo = -scale
        while f(lo) <= 0:
            lo *= 2.0
        branches.append((-math.inf, _root(f, lo, -tiny * a[0], scale)))
    else:
        branches.append((-math.inf, _root(f, 0.0, a[0] * (1 - tiny), scale)))

    for j in range(len(a) - 1):
        lo, hi = a[j] * (1 + tiny), a[j + 1] * (1 - tiny)
        g = lambda u: _dphi(u, a, w)  # noqa: E731
        if not (g(lo) < 0 < g(hi)):
            raise NumericalError(f"cannot bracket the minimum of phi on ({a[j]}, {a[j + 1]})")
        umin = _root(g, lo, hi, scale)
        if f(umin) <= 0:
            continue
        branches.append((_root(f, lo, umin, scale), _root(f, umin, hi, scale)))

    hi = 2.0 * a[-1]
    while f(hi) <= 0:
        hi *= 2.0
    branches.append((_root(f, a[-1] * (1 + tiny), hi, scale), math.inf))
    return branches


@dataclass(frozen=True, eq=False)
class SupportSet:
    """Ordered disjoint support intervals of the LSD and their contour bounds.

    ``edge_s`` holds, per interval, the critical points ``s*`` of ``z(s)``
    whose critical values are the interval ends (``nan`` when the end is the
    origin at ``c == 1``).
    """

    intervals: np.ndarray
    contour_bounds: np.ndarray
    c: float
    edge_s: np.ndarray
    merged: bool = False
    merged_gaps: tuple = field(default=())

    @property
    def m(self) -> int:
        return int(self.intervals.shape[0])

    def contains(self, x: float) -> bool:
        return bool(np.any((self.intervals[:, 0] <= x) & (x <= self.intervals[:, 1])))

    def boundaries(self) -> np.ndarray:
        """Abscissas separating consecutive intervals (``δ_i^+ = δ_{i+1}^-``)."""
        return self.contour_bounds[:-1, 1].copy()


def support_intervals(H: DiscretePSD, c: float) -> SupportSet:
    """Support of the limiting spectral distribution for ``(H, c)``."""
    if not c > 0:
        raise DomainError("c must be positive")
    if abs(H.total_mass - 1.0) > 1e-10:
        raise DomainError("support_intervals needs a full probability PSD")
    a, w = _params(H)
    branches = _increasing_branches(H, c)

    def image(u):
        if math.isinf(u):
            return u
        return float(_x_of_u(u, a, w, c))

    def s_of(u):
        return -1.0 / u if (u != 0 and not math.isinf(u)) else math.nan

    imgs = [(image(lo), image(hi)) for lo, hi in branches]
    scale = imgs[-1][0]
    merged_gaps = []
    keep = [0]
    for idx in range(1, len(branches) - 1):
        lo, hi = imgs[idx]
        if hi - lo < MERGE_RTOL * scale:
            merged_gaps.append((lo, hi))
            continue
        keep.append(idx)
    keep.append(len(branches) - 1)
    if merged_gaps:
        warnings.warn(
            f"{len(merged_gaps)} support gap(s) narrower than {MERGE_RTOL:g} x scale "
            "reported as merged",
            RuntimeWarning,
            stacklevel=2,
        )

    intervals, edges = [], []
    for left, right in zip(keep[:-1], keep[1:]):
        intervals.append((imgs[left][1], imgs[right][0]))
        edges.append((s_of(branches[left][1]), s_of(branches[right][0])))
    intervals = np.array(intervals, dtype=float)
    if np.any(np.diff(intervals.ravel()) <= 0):
        raise NumericalError(f"support edges are not strictly ordered: {intervals.tolist()}")

    m = len(intervals)
    bounds = np.empty((m, 2))
    for i in range(m - 1):
        mid = 0.5 * (intervals[i, 1] + intervals[i + 1, 0])
        bounds[i, 1] = bounds[i + 1, 0] = mid
    x1 = intervals[0, 0]
    bounds[0, 0] = x1 / 2.0 if c < 1 else -max(1.0, x1)
    bounds[-1, 1] = intervals[-1, 1] + 0.5 * (intervals[-1, 1] - intervals[-1, 0])
    return SupportSet(
        intervals=intervals,
        contour_bounds=bounds,
        c=float(c),
        edge_s=np.array(edges, dtype=float),
        merged=bool(merged_gaps),
        merged_gaps=tuple(merged_gaps),
    )


# -- density, u-curve, division -----------------------------------------------


def lsd_density(x, H: DiscretePSD, c: float, eps: float = DENSITY_EPS):
    """Density of the LSD at ``x > 0`` via Stieltjes inversion."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs <= 0):
        raise DomainError("the density is only evaluated at x > 0")
    z = xs + 1j * eps
    s = (_solve_upper(z, H, c) + (1.0 - c) / z) / c
    out = np.maximum(s.imag / math.pi, 0.0)
    return out[0] if np.ndim(x) == 0 else out


def u_curve(x, H: DiscretePSD, c: float):
    """``u(x) = -1/s̲(x)`` for real ``x`` outside the support and away from 0."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    for idx, xv in enumerate(xs):
        if xv == 0:
            raise DomainError("u(x) is undefined at x = 0")
        out[idx] = -1.0 / solve_companion(xv, H, c).real
    return out[0] if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class PsdDivision:
    parts: tuple
    boundaries: np.ndarray

    @property
    def m(self) -> int:
        return len(self.parts)

    @property
    def orders(self) -> tuple:
        return tuple(p.k for p in self.parts)

    @property
    def masses(self) -> tuple:
        return tuple(p.total_mass for p in self.parts)


def divide_psd(H: DiscretePSD, support: SupportSet) -> PsdDivision:
    """Split ``H`` into the sub-measures matched to each support interval."""
    lo = u_curve(support.contour_bounds[:, 0], H, support.c)
    hi = u_curve(support.contour_bounds[:, 1], H, support.c)
    parts = []
    assigned = np.zeros(H.k, dtype=int)
    for i in range(support.m):
        inside = (H.atoms >= lo[i]) & (H.atoms <= hi[i])
        assigned += inside
        if not inside.any():
            raise NumericalError(
                f"support interval {i} maps to [{lo[i]}, {hi[i]}], which holds no atom"
            )
        parts.append(DiscretePSD(H.atoms[inside], H.weights[inside]))
    if np.any(assigned != 1):
        bad = H.atoms[assigned != 1]
        raise NumericalError(f"atoms {bad.tolist()} not assigned to exactly one part")
    return PsdDivision(tuple(parts), np.column_stack([lo, hi]))


def lsd_quantiles(H: DiscretePSD, c: float, levels, nodes: int = 2000) -> np.ndarray:
    """Quantiles of the LSD (``c < 1``) at the given probability levels.

    The CDF is tabulated per support interval on the substitution
    ``x = lo + (hi - lo)(1 - cos t)/2``, which cancels the square-root edge
    behaviour of the density, then inverted by monotone interpolation.
    """
    if not c < 1:
        raise DomainError("quantiles are only tabulated for c < 1 (no atom at 0)")
    support = support_intervals(H, c)
    xs_all, cdf_all = [], []
    t = np.linspace(0.0, math.pi, nodes)
    for lo, hi in support.intervals:
        x = lo + (hi - lo) * (1.0 - np.cos(t)) / 2.0
        dens = np.zeros_like(x)
        dens[1:-1] = lsd_density(x[1:-1], H, c)
        integrand = dens * (hi - lo) * np.sin(t) / 2.0
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t))])
        xs_all.append(x)
        cdf_all.append(cum)
    ends = np.cumsum([cum[-1] for cum in cdf_all])
    total = ends[-1]
    starts = np.concatenate([[0.0], ends[:-1]]) / total
    lev = np.asarray(levels, dtype=float)
    # a level is served by the interval whose mass range contains it, so no
    # quantile is ever interpolated across a gap
    which = np.clip(np.searchsorted(ends / total, lev, side="left"), 0, len(ends) - 1)
    out = np.empty_like(lev)
    for i, (x, cum) in enumerate(zip(xs_all, cdf_all)):
        sel = which == i
        if sel.any():
            out[sel] = np.interp(lev[sel] - starts[i], cum / total, x)
    return out
