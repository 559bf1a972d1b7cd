"""Local moment estimators of the parts ``H_i`` by residue calculus.

The estimator of the ``l``-th moment of ``H_i`` is

    γ̂_{i,l} = (-1)^l (n/p) (1/2πi) ∮_{C_i} z s̲_n'(z) / s̲_n(z)^l dz,

and the contour integral equals the sum of the residues of
``f_l(z) = z s̲_n'(z)/s̲_n(z)^l`` at the eigenvalues ``A_i`` and the zeros
``B_i`` of ``s̲_n`` enclosed by ``C_i``. Quadrature over the rectangle is
kept only as an independent check (``oracle_contour_moment``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec

from . import kernels
from .empirical import ClusterAssignment, EigenSample, companion_stieltjes_n, zeros_of_companion
from .errors import DomainError, LengthError, NumericalError
from .forward import _solve_upper, companion_z_prime, solve_companion
from .psd import DiscretePSD, MomentVector

MAX_ORDER = 15
DEGENERATE_SLOPE = 1e-14


def residue_at_lambda(lam: float, l: int) -> float:
    if l < 1:
        raise DomainError("l must be >= 1")
    return -float(lam) if l == 1 else 0.0


def _closed_form(mu, d, l):
    """Residue at a simple zero ``mu`` from derivatives ``d[j] = s̲_n^{(j)}(mu)``."""
    s1 = d[1]
    if l == 1:
        return mu
    if l == 2:
        return 1.0 / s1
    s2 = d[2]
    if l == 3:
        return -s2 / (2.0 * s1**3)
    s3 = d[3]
    if l == 4:
        return (3.0 * s2**2 - s1 * s3) / (6.0 * s1**5)
    s4 = d[4]
    if l == 5:
        return -(15.0 * s2**3 - 10.0 * s1 * s2 * s3 + s1**2 * s4) / (24.0 * s1**7)
    raise DomainError("closed forms exist only for l <= 5")


def _series_inverse(q, terms):
    out = np.zeros(terms)
    out[0] = 1.0 / q[0]
    for j in range(1, terms):
        out[j] = -np.dot(q[1 : j + 1], out[j - 1 :: -1][:j]) / q[0]
    return out


def _series_mul(a, b, terms):
    return np.convolve(a[:terms], b[:terms])[:terms]


def laurent_residue(mu: float, d, l: int) -> float:
    """Residue of ``z s̲'(z)/s̲(z)^l`` at a simple zero ``mu`` by series arithmetic.

    With ``t = z - mu`` and Taylor coefficients ``c_j = d[j]/j!``, write
    ``s̲ = t q(t)`` and ``s̲' = r(t)``; the residue is the ``t^{l-1}``
    coefficient of ``(mu + t) r(t) q(t)^{-l}``. Needs ``d[0..l]``.
    """
    if l < 1:
        raise DomainError("l must be >= 1")
    d = np.asarray(d, dtype=float)
    if d.size < l + 1:
        raise LengthError(f"order-{l} residue needs derivatives up to order {l}")
    coef = d[: l + 1] / np.array([math.factorial(j) for j in range(l + 1)])
    q = coef[1 : l + 1]
    r = np.arange(1, l + 1) * coef[1 : l + 1]
    inv_q = _series_inverse(q, l)
    qpow = np.zeros(l)
    qpow[0] = 1.0
    for _ in range(l):
        qpow = _series_mul(qpow, inv_q, l)
    body = _series_mul(r, qpow, l)
    # coefficient of t^{l-1} in (mu + t) * body
    return mu * body[l - 1] + (body[l - 2] if l >= 2 else 0.0)


def _residues_from_derivs(mu, d, l):
    if abs(d[1]) < DEGENERATE_SLOPE:
        raise NumericalError(f"degenerate zero of s̲_n at {mu!r}: |s̲_n'(mu)| < {DEGENERATE_SLOPE:g}")
    if l <= 5:
        return _closed_form(mu, d, l)
    return laurent_residue(mu, d, l)


def residue_at_mu(mu: float, sample: EigenSample, l: int) -> float:
    """Residue of ``f_l`` at a zero ``mu`` of ``s̲_n`` (closed forms for l <= 5)."""
    if l < 1:
        raise DomainError("l must be >= 1")
    d = kernels.companion_derivatives(np.array([mu]), sample.lambdas, sample.n, max(l, 4))[0]
    return _residues_from_derivs(float(mu), d, l)


def _cluster_residue_sums(sample, lam_a, mu_b, L):
    if L > MAX_ORDER:
        raise DomainError(f"moment order {L} exceeds the supported maximum {MAX_ORDER}")
    sums = np.zeros(L + 1)
    if L >= 1:
        sums[1] = -np.sum(lam_a) + np.sum(mu_b)
    if L >= 2 and mu_b.size:
        derivs = kernels.companion_derivatives(mu_b, sample.lambdas, sample.n, max(L, 4))
        slope = derivs[:, 1]
        if np.any(np.abs(slope) < DEGENERATE_SLOPE):
            j = int(np.argmin(np.abs(slope)))
            raise NumericalError(f"degenerate zero of s̲_n at {mu_b[j]!r}")
        for l in range(2, L + 1):
            sums[l] = sum(_residues_from_derivs(mu, d, l) for mu, d in zip(mu_b, derivs))
    return sums


def estimate_cluster_moments(
    sample: EigenSample, assignment: ClusterAssignment, i: int, L: int
) -> np.ndarray:
    """``γ̂_{i,0..L}`` for cluster ``i``; ``γ̂_{i,0} = v_i / v``."""
    if L < 1:
        raise DomainError("L must be >= 1")
    sums = _cluster_residue_sums(sample, assignment.A(i), assignment.B(i), L)
    out = np.empty(L + 1)
    out[0] = assignment.counts[i] / sample.v
    signs = np.where(np.arange(1, L + 1) % 2, -1.0, 1.0)
    out[1:] = signs * (sample.n / sample.p) * sums[1:]
    return out


@dataclass(frozen=True, eq=False)
class MomentTable:
    """Estimated moments per cluster; ``rows[i][l] = γ̂_{i,l}``."""

    rows: tuple
    sources: tuple

    @property
    def m(self) -> int:
        return len(self.rows)

    def row(self, i: int) -> np.ndarray:
        return self.rows[i]

    def moments(self, i: int, L: int | None = None) -> MomentVector:
        r = self.rows[i] if L is None else self.rows[i][: L + 1]
        return MomentVector(r, "estimated")

    def to_csv(self) -> str:
        lines = ["cluster,order,value,source"]
        for i, (r, src) in enumerate(zip(self.rows, self.sources)):
            for l, val in enumerate(r):
                lines.append(f"{i + 1},{l},{val:.17g},{src}")
        return "\n".join(lines) + "\n"


def moment_table(sample: EigenSample, assignment: ClusterAssignment, L) -> MomentTable:
    """Moment table with orders ``0..L`` (``L`` scalar or one per cluster)."""
    orders = [L] * assignment.m if np.ndim(L) == 0 else list(L)
    rows = tuple(
        estimate_cluster_moments(sample, assignment, i, Li) for i, Li in enumerate(orders)
    )
    return MomentTable(rows, ("residue",) * len(rows))


# -- quadrature oracle --------------------------------------------------------


def _upper_path_integral(f, lo, hi, h):
    """``Im`` of the integral of ``f`` along hi -> hi+ih -> lo+ih -> lo.

    ``f`` maps a point to a vector of integrands that are real on the real
    axis, so the lower half of the rectangle contributes the conjugate and
    the closed integral is ``2i`` times this. Components are normalised by a
    probe magnitude so one adaptive rule serves every order.
    """
    legs = [(complex(hi, 0), complex(hi, h)), (complex(hi, h), complex(lo, h)), (complex(lo, h), complex(lo, 0))]
    probes = np.max([np.abs(f(z0 + 0.5 * (z1 - z0))) * abs(z1 - z0) for z0, z1 in legs], axis=0)
    scale = np.where(probes > 0, probes, 1.0)
    total = 0.0
    for z0, z1 in legs:
        dz = z1 - z0

        def g(t, z0=z0, dz=dz):
            return (f(z0 + t * dz) * dz).imag / scale

        val, _ = quad_vec(g, 0.0, 1.0, epsabs=1e-14, epsrel=1e-12, norm="max", limit=2000)
        total = total + val
    return total * scale


def oracle_contour_moments(source, lo: float, hi: float, orders, half_height: float = 1.0) -> np.ndarray:
    """Moments of the given orders from adaptive quadrature over the rectangle
    ``[lo, hi] x [-half_height, half_height]``.

    ``source`` is an :class:`EigenSample` (estimator with ``s̲_n``) or a
    ``(DiscretePSD, c)`` pair (population identity with ``s̲``).
    """
    ls = np.atleast_1d(np.asarray(orders, dtype=int))
    if np.any(ls < 1):
        raise DomainError("orders must be >= 1")
    if isinstance(source, EigenSample):
        sample = source
        poles = np.concatenate([sample.lambdas, [0.0], zeros_of_companion(sample)])
        if np.min(np.abs(np.subtract.outer([lo, hi], poles))) < 1e-6:
            raise DomainError("a pole lies within 1e-6 of the contour")

        def pair(z):
            return companion_stieltjes_n(z, sample, 0), companion_stieltjes_n(z, sample, 1)

        prefactor = np.where(ls % 2, -1.0, 1.0) * sample.n / sample.p
    else:
        H, c = source
        if not isinstance(H, DiscretePSD):
            raise DomainError("source must be an EigenSample or a (DiscretePSD, c) pair")

        def pair(z):
            if z.imag > 0:
                s = _solve_upper(np.array([z]), H, c)[0]
            elif z.imag < 0:
                s = np.conj(_solve_upper(np.array([np.conj(z)]), H, c)[0])
            else:
                s = solve_companion(z, H, c)
            return s, 1.0 / companion_z_prime(s, H, c)

        prefactor = np.where(ls % 2, -1.0, 1.0) / c

    def f(z):
        s, ds = pair(z)
        return z * ds / s**ls

    return prefactor * _upper_path_integral(f, lo, hi, half_height) / math.pi


def oracle_contour_moment(source, lo: float, hi: float, l: int, half_height: float = 1.0) -> float:
    """Single-order version of :func:`oracle_contour_moments`."""
    return float(oracle_contour_moments(source, lo, hi, [l], half_height)[0])
