"""Discrete spectral measures, their moments and Hankel matrices."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from . import _ldlinalg
from .errors import DomainError, LengthError

LD = np.longdouble

#: Relative gap below which two atoms are considered equal.
ATOM_GAP_RTOL = 1e-10


def _frozen(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DiscretePSD:
    """A finite positive measure ``sum_i weights[i] * delta(atoms[i])``.

    Full population spectra have ``total_mass == 1``; the parts ``H_i`` of a
    division are sub-probability measures and share this type.

    Unordered input is sorted, carrying the weights along.
    """

    atoms: np.ndarray
    weights: np.ndarray
    total_mass: float = field(init=False)

    def __post_init__(self):
        atoms = np.atleast_1d(np.asarray(self.atoms, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if atoms.ndim != 1 or atoms.shape != weights.shape:
            raise DomainError("atoms and weights must be 1-d sequences of equal length")
        if atoms.size == 0:
            raise DomainError("a discrete PSD needs at least one atom")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise DomainError("atoms and weights must be finite")
        order = np.argsort(atoms, kind="stable")
        atoms, weights = atoms[order], weights[order]
        if atoms[0] <= 0:
            raise DomainError(f"atoms must be strictly positive, got {atoms[0]!r}")
        if np.any(weights <= 0):
            raise DomainError("weights must be strictly positive")
        if atoms.size > 1:
            gaps = np.diff(atoms)
            if np.any(gaps <= ATOM_GAP_RTOL * atoms[1:]):
                i = int(np.argmin(gaps / atoms[1:]))
                raise DomainError(
                    f"atoms {atoms[i]!r} and {atoms[i + 1]!r} coincide within {ATOM_GAP_RTOL:g}"
                )
        object.__setattr__(self, "atoms", _frozen(atoms))
        object.__setattr__(self, "weights", _frozen(weights))
        object.__setattr__(self, "total_mass", math.fsum(weights))

    @property
    def k(self) -> int:
        return int(self.atoms.size)

    def __len__(self):
        return self.k

    def __eq__(self, other):
        if not isinstance(other, DiscretePSD):
            return NotImplemented
        return np.array_equal(self.atoms, other.atoms) and np.array_equal(
            self.weights, other.weights
        )

    def __repr__(self):
        terms = " + ".join(f"{w:g}*d({a:g})" for a, w in zip(self.atoms, self.weights))
        return f"DiscretePSD({terms})"

    def normalized(self) -> DiscretePSD:
        """Rescale weights multiplicatively so they sum to one."""
        return DiscretePSD(self.atoms, self.weights / self.total_mass)

    def restrict(self, lo: float, hi: float) -> DiscretePSD | None:
        """Sub-measure on the closed interval ``[lo, hi]`` (None if empty)."""
        keep = (self.atoms >= lo) & (self.atoms <= hi)
        if not keep.any():
            return None
        return DiscretePSD(self.atoms[keep], self.weights[keep])

    # -- text record ---------------------------------------------------------

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# total_mass={self.total_mass:.17g}\n")
        for a, w in zip(self.atoms, self.weights):
            buf.write(f"{a:.17g},{w:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> DiscretePSD:
        atoms, weights = [], []
        declared = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line.lstrip("#").partition("=")
                if key.strip() == "total_mass":
                    declared = float(value)
                continue
            try:
                a, w = (float(tok) for tok in line.split(","))
            except ValueError as exc:
                raise DomainError(f"line {lineno}: expected 'atom,weight', got {raw!r}") from exc
            atoms.append(a)
            weights.append(w)
        psd = cls(atoms, weights)
        if declared is not None and abs(declared - psd.total_mass) > 1e-12 * max(1.0, declared):
            raise DomainError(
                f"header total_mass={declared!r} disagrees with weight sum {psd.total_mass!r}"
            )
        return psd

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> DiscretePSD:
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True, eq=False)
class MomentVector:
    """Moments ``gamma_0, ..., gamma_L`` held in long double precision."""

    values: np.ndarray
    origin: str = "exact"

    def __post_init__(self):
        if self.origin not in ("exact", "estimated"):
            raise DomainError(f"origin must be 'exact' or 'estimated', got {self.origin!r}")
        object.__setattr__(self, "values", _frozen(self.values, dtype=LD))

    def __len__(self):
        return int(self.values.size)

    def __getitem__(self, item):
        return self.values[item]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    @property
    def max_order(self) -> int:
        return len(self) - 1


def moments_of(psd: DiscretePSD, L: int) -> MomentVector:
    """Moments ``gamma_l = sum_i m_i b_i**l`` for ``l = 0..L``."""
    if L < 0:
        raise DomainError("L must be non-negative")
    b = psd.atoms.astype(LD)
    m = psd.weights.astype(LD)
    powers = np.ones_like(b)
    out = np.empty(L + 1, dtype=LD)
    for l in range(L + 1):
        out[l] = np.sum(m * powers)
        powers = powers * b
    out[0] = LD(psd.total_mass)
    return MomentVector(out, "exact")


def hankel(moments, N: int) -> np.ndarray:
    """The ``N x N`` Hankel matrix ``(gamma_{r+s})``, 0-based, in long double."""
    g = np.asarray(moments, dtype=LD)
    if N < 1:
        raise DomainError("Hankel order must be at least 1")
    if g.size < 2 * N - 1:
        raise LengthError(f"order-{N} Hankel matrix needs {2 * N - 1} moments, got {g.size}")
    idx = np.add.outer(np.arange(N), np.arange(N))
    return g[idx]


def hankel_det_identity_check(psd: DiscretePSD) -> tuple[float, float]:
    """Determinant of ``Gamma(G, k)`` computed directly and by the product formula.

    The product formula is ``prod(m_i) * prod_{i<j} (b_i - b_j)**2``.
    """
    k = psd.k
    gamma = hankel(moments_of(psd, 2 * k - 2), k)
    direct = _ldlinalg.det(gamma)
    b = psd.atoms.astype(LD)
    formula = np.prod(psd.weights.astype(LD))
    for i, j in combinations(range(k), 2):
        formula *= (b[i] - b[j]) ** 2
    return float(direct), float(formula)


class Partition(tuple):
    """Numbers of atoms ``(k_1, ..., k_m)`` carried by each part of a division."""

    def __new__(cls, orders):
        orders = tuple(int(o) for o in orders)
        if not orders:
            raise DomainError("a partition needs at least one part")
        if any(o < 1 for o in orders):
            raise DomainError(f"partition entries must be >= 1, got {orders}")
        return super().__new__(cls, orders)

    @property
    def k(self) -> int:
        return sum(self)

    @property
    def m(self) -> int:
        return len(self)

    def __repr__(self):
        return f"Partition{tuple(self)!r}"


def enumerate_partitions(k: int, m: int) -> list[Partition]:
    """All compositions of ``k`` into ``m`` positive parts, in lexicographic order."""
    if m < 1 or k < 1:
        raise DomainError("k and m must be positive")
    if m > k:
        raise DomainError(f"cannot split k={k} atoms into m={m} non-empty parts")
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(Partition(prefix + (remaining,)))
            return
        for first in range(1, remaining - slots + 2):
            rec(prefix + (first,), remaining - first, slots - 1)

    rec((), k, m)
    return out
