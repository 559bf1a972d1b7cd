"""Sample side: eigenvalue samples, the empirical companion transform, its
real zeros, and the grouping of eigenvalues into clusters."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DomainError, NumericalError

log = logging.getLogger(__name__)

TIE_JITTER = 1e-12


@dataclass(frozen=True, eq=False)
class EigenSample:
    """Sorted nonzero eigenvalues of a ``p x p`` sample covariance built from
    ``n`` observations; ``len(lambdas) == min(p, n)``."""

    lambdas: np.ndarray
    p: int
    n: int

    def __post_init__(self):
        lam = np.sort(np.asarray(self.lambdas, dtype=float).ravel())
        if self.p < 1 or self.n < 1:
            raise DomainError("p and n must be positive")
        if lam.size != min(self.p, self.n):
            raise DomainError(
                f"expected v = min(p, n) = {min(self.p, self.n)} eigenvalues, got {lam.size}"
            )
        if lam.size == 0 or lam[0] <= 0 or not np.all(np.isfinite(lam)):
            raise DomainError("eigenvalues must be finite and strictly positive")
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "n", int(self.n))

    @property
    def v(self) -> int:
        return int(self.lambdas.size)

    @property
    def ratio(self) -> float:
        return self.p / self.n

    def scaled(self, factor: float) -> EigenSample:
        return EigenSample(self.lambdas * factor, self.p, self.n)

    @classmethod
    def from_file(cls, path, p: int, n: int) -> EigenSample:
        """Read one eigenvalue per line (first CSV column; ``#`` comments and a
        non-numeric header are skipped). Zero eigenvalues are dropped."""
        values = []
        for raw in Path(path).read_text().splitlines():
            tok = raw.split("#", 1)[0].split(",")[0].strip()
            if not tok:
                continue
            try:
                values.append(float(tok))
            except ValueError:
                if values:
                    raise DomainError(f"non-numeric eigenvalue entry {raw!r}") from None
        lam = np.array(values)
        return cls(lam[lam > 0], p, n)


def companion_stieltjes_n(z, sample: EigenSample, order: int = 0):
    """``order``-th derivative of ``s̲_n(z) = -(1 - v/n)/z + (1/n) sum 1/(λ_i - z)``.

    Summing over the ``v`` nonzero eigenvalues with ``1 - v/n`` is the same
    function as summing over all ``p`` eigenvalues with ``1 - p/n``: the
    ``p - n`` zero eigenvalues present when ``p > n`` cancel the pole at 0.
    """
    if order < 0:
        raise DomainError("order must be non-negative")
    zz = np.asarray(z)
    lam = sample.lambdas
    if np.any(zz == 0) or np.any(np.isin(zz, lam)):
        raise DomainError("z sits on a pole of s̲_n")
    beta = 1.0 - sample.v / sample.n
    fact = math.factorial(order)
    sign = -1.0 if order % 2 else 1.0
    terms = 1.0 / (lam - zz[..., None]) ** (order + 1)
    out = -beta * sign * fact / zz ** (order + 1) + fact / sample.n * terms.sum(axis=-1)
    return out[()] if np.ndim(out) == 0 else out


def _untied(lam):
    gaps = np.diff(lam)
    if lam.size > 1 and np.any(gaps <= 4 * np.finfo(float).eps * lam[1:]):
        log.warning("repeated sample eigenvalues; applying %g relative jitter", TIE_JITTER)
        lam = lam * (1.0 + TIE_JITTER * np.arange(lam.size))
    return lam


def zeros_of_companion(sample: EigenSample) -> np.ndarray:
    """Real zeros ``μ_1 < λ_1 < μ_2 < ... < μ_v < λ_v`` of ``s̲_n``.

    ``μ_1`` lies in ``(0, λ_1)`` when ``p < n``. When ``p >= n`` there is no
    zero below ``λ_1`` and ``μ_1 = 0`` by convention; it never enters a
    residue sum.
    """
    lam = _untied(sample.lambdas)
    mu = kernels.companion_zeros(lam, sample.n)
    inner = mu[1:]
    ok = np.all((inner > lam[:-1]) & (inner < lam[1:]))
    ok &= (mu[0] == 0) if sample.v >= sample.n else (0 < mu[0] < lam[0])
    if not ok:
        bad = np.flatnonzero(~((inner > lam[:-1]) & (inner < lam[1:])))
        raise NumericalError(f"zero bracketing failed near brackets {bad[:5].tolist()}")
    return mu


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    """Contiguous clusters ``A_i`` of sample eigenvalues with their zero sets ``B_i``.

    ``ranges[i] = (start, stop)`` indexes ``lambdas``; ``B_i`` holds the ``μ_j``
    with ``j`` in ``A_i``, minus a ``μ_1 = 0``.
    """

    lambdas: np.ndarray
    mus: np.ndarray
    ranges: tuple

    def __post_init__(self):
        v = self.lambdas.size
        pos = 0
        for start, stop in self.ranges:
            if start != pos or stop <= start:
                raise DomainError(f"cluster ranges must tile 0..{v} contiguously: {self.ranges}")
            pos = stop
        if pos != v:
            raise DomainError(f"cluster ranges must cover all {v} eigenvalues")

    @property
    def m(self) -> int:
        return len(self.ranges)

    @property
    def counts(self) -> tuple:
        return tuple(stop - start for start, stop in self.ranges)

    def A(self, i: int) -> np.ndarray:
        start, stop = self.ranges[i]
        return self.lambdas[start:stop]

    def B(self, i: int) -> np.ndarray:
        start, stop = self.ranges[i]
        mu = self.mus[start:stop]
        return mu[mu != 0]

    def gap_before(self, i: int) -> float:
        """Distance between cluster ``i`` and its left neighbour (inf for i = 0)."""
        if i == 0:
            return math.inf
        return float(self.lambdas[self.ranges[i][0]] - self.lambdas[self.ranges[i][0] - 1])

    def merged(self, groups) -> ClusterAssignment:
        """Merge contiguous groups of clusters, e.g. ``[[0, 1], [2]]``."""
        flat = [i for g in groups for i in g]
        if flat != list(range(self.m)):
            raise DomainError(f"merge groups must be contiguous and cover 0..{self.m - 1}: {groups}")
        ranges = tuple((self.ranges[g[0]][0], self.ranges[g[-1]][1]) for g in groups)
        return ClusterAssignment(self.lambdas, self.mus, ranges)


def _ranges_from_cuts(cuts, v):
    edges = [0, *cuts, v]
    return tuple(zip(edges[:-1], edges[1:]))


def cluster_eigenvalues(
    sample: EigenSample,
    m: int | None = None,
    *,
    boundaries=None,
    counts=None,
    mus=None,
) -> ClusterAssignment:
    """Group sample eigenvalues into contiguous clusters.

    Exactly one of ``m`` (split at the ``m - 1`` largest consecutive gaps),
    ``boundaries`` (split at these abscissas) or ``counts`` (cluster sizes in
    order) selects the rule.
    """
    if sum(x is not None for x in (m, boundaries, counts)) != 1:
        raise DomainError("give exactly one of m, boundaries, counts")
    lam = sample.lambdas
    v = sample.v
    if mus is None:
        mus = zeros_of_companion(sample)
    if boundaries is not None:
        bnd = np.sort(np.asarray(boundaries, dtype=float))
        if np.any(np.isin(bnd, lam)):
            raise DomainError("a cluster boundary coincides with a sample eigenvalue")
        cuts = np.searchsorted(lam, bnd).tolist()
        ranges = _ranges_from_cuts(cuts, v)
        if any(stop <= start for start, stop in ranges):
            raise DomainError(f"boundaries {bnd.tolist()} leave an empty cluster")
    elif counts is not None:
        counts = [int(c) for c in counts]
        if sum(counts) != v or any(c < 1 for c in counts):
            raise DomainError(f"cluster sizes {counts} must be positive and sum to v = {v}")
        ranges = _ranges_from_cuts(np.cumsum(counts)[:-1].tolist(), v)
    else:
        if not 1 <= m <= v:
            raise DomainError(f"need 1 <= m <= v = {v}, got m = {m}")
        gaps = np.diff(lam)
        cuts = np.sort(np.argsort(-gaps, kind="stable")[: m - 1] + 1).tolist()
        ranges = _ranges_from_cuts(cuts, v)
    return ClusterAssignment(lam, np.asarray(mus, dtype=float), ranges)
