"""Choose how many atoms each cluster carries.

For a candidate ``(k_1, ..., k_m)`` the score is the smallest eigenvalue over
the clusters' estimated Hankel matrices of orders ``k_i``; on exact moments it
is positive only at the true partition.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import DomainError, LengthError
from .psd import Partition, enumerate_partitions, hankel

log = logging.getLogger(__name__)

PD_RELATIVE = 1e-12


def _rows(table):
    return table.rows if hasattr(table, "rows") else tuple(np.asarray(r) for r in table)


def _lambda_min(row, order):
    if len(row) < 2 * order - 1:
        raise LengthError(f"order-{order} Hankel matrix needs moments up to {2 * order - 2}")
    return float(np.linalg.eigvalsh(hankel(row, order).astype(float))[0])


def g_hat(table, k) -> float:
    """``min_i lambda_min(Gamma_hat(H_i, k_i))``; ``table`` is a MomentTable or
    a sequence of moment rows."""
    rows = _rows(table)
    k = Partition(k)
    if len(rows) != k.m:
        raise DomainError(f"partition has {k.m} parts but the table has {len(rows)} clusters")
    return min(_lambda_min(r, ki) for r, ki in zip(rows, k))


def pd_depth(row, limit: int) -> int:
    """Largest ``N <= limit`` with ``Gamma_hat(N)`` positive definite (0 if none).

    Positive definite means every eigenvalue exceeds ``1e-12 * trace``.
    """
    depth = 0
    for N in range(1, limit + 1):
        if len(row) < 2 * N - 1:
            raise LengthError(f"pruning to depth {limit} needs moments up to {2 * limit - 2}")
        gam = hankel(row, N).astype(float)
        ev = np.linalg.eigvalsh(gam)
        if not ev[0] > PD_RELATIVE * np.trace(gam):
            break
        depth = N
    return depth


def score_partitions(table, k: int, m: int, prune: bool = True) -> dict:
    """Scores ``g_hat`` of every candidate partition, in lexicographic order.

    With ``prune`` only partitions with ``k_i <= d_i`` are scored; when that
    leaves nothing the full set is used with a warning.
    """
    rows = _rows(table)
    if not 1 <= m <= k:
        raise DomainError(f"need k >= m >= 1, got k={k}, m={m}")
    if len(rows) != m:
        raise DomainError(f"table has {len(rows)} clusters, expected m={m}")
    cands = enumerate_partitions(k, m)
    if prune and len(cands) > 1:
        depth = [pd_depth(r, k - m + 1) for r in rows]
        kept = [c for c in cands if all(ki <= d for ki, d in zip(c, depth))]
        if kept:
            cands = kept
        else:
            log.warning("positive-definiteness pruning left no candidate (d = %s); scoring all", depth)
    return {c: g_hat(rows, c) for c in cands}


def estimate_partition(table, k: int, m: int) -> Partition:
    """The maximiser of ``g_hat``; ties go to the lexicographically smallest."""
    if m == k:
        return Partition((1,) * k)
    scores = score_partitions(table, k, m)
    best, best_val = None, -np.inf
    for cand, val in scores.items():
        if val > best_val:
            best, best_val = cand, val
    return best
