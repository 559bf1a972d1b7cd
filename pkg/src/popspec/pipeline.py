"""End-to-end estimation: cluster, estimate local moments, choose the
partition, invert per cluster, and fall back to merging clusters when an
inversion fails."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .empirical import ClusterAssignment, EigenSample, cluster_eigenvalues, zeros_of_companion
from .errors import ConvergenceError, DomainError, EstimationError, InversionError, NumericalError
from .inversion import invert, solve_known_weights, solve_partial_weights
from .partition import estimate_partition, score_partitions
from .psd import DiscretePSD, Partition
from .residues import MAX_ORDER, MomentTable, moment_table


@dataclass(frozen=True)
class EstimationConfig:
    """What to estimate and how.

    ``k`` is the total number of atoms. Exactly one of ``m`` (split at the
    largest gaps), ``boundaries`` or ``counts`` defines the clusters.
    ``merge_plan`` groups contiguous clusters (0-based), ``partition`` forces
    the atoms per cluster (before merging, when a plan is given) and
    ``known_weights`` has one entry per atom, ``None`` where unknown.
    """

    k: int | None
    m: int | None = None
    boundaries: tuple | None = None
    counts: tuple | None = None
    merge_plan: tuple | None = None
    partition: tuple | None = None
    known_weights: tuple | None = None
    fallback: bool = True

    def __post_init__(self):
        if self.k is None:
            raise DomainError(
                "the number of atoms k must be given; choosing k is a separate "
                "model-order selection problem"
            )
        if self.k < 1:
            raise DomainError("k must be positive")
        if sum(x is not None for x in (self.m, self.boundaries, self.counts)) != 1:
            raise DomainError("give exactly one of m, boundaries, counts")
        n_clusters = self._n_clusters()
        if self.merge_plan is not None:
            flat = [i for g in self.merge_plan for i in g]
            if flat != list(range(n_clusters)) or any(len(g) == 0 for g in self.merge_plan):
                raise DomainError(f"merge plan must group clusters 0..{n_clusters - 1} contiguously")
        if self.partition is not None:
            part = Partition(self.partition)
            if part.k != self.k or part.m != n_clusters:
                raise DomainError(f"forced partition {tuple(part)} does not match k={self.k}, m={n_clusters}")
        if self.known_weights is not None and len(self.known_weights) != self.k:
            raise DomainError("known_weights needs one entry per atom")
        final = len(self.merge_plan) if self.merge_plan is not None else n_clusters
        if self.k < final:
            raise DomainError(f"k={self.k} is smaller than the number of clusters")

    def _n_clusters(self):
        if self.m is not None:
            return int(self.m)
        if self.boundaries is not None:
            return len(self.boundaries) + 1
        return len(self.counts)


@dataclass
class EstimationResult:
    theta_hat: DiscretePSD
    partition: Partition
    table: MomentTable
    assignment: ClusterAssignment
    diagnostics: dict = field(default_factory=dict)

    def diagnostics_text(self) -> str:
        return "".join(f"{key}={_fmt(val)}\n" for key, val in self.diagnostics.items())


def _fmt(val):
    if isinstance(val, float):
        return f"{val:.17g}"
    if isinstance(val, dict):
        return ";".join(f"{'-'.join(map(str, key))}:{_fmt(v)}" for key, v in val.items())
    if isinstance(val, (list, tuple)):
        return ";".join(_fmt(v) for v in val)
    return str(val)


def _solve_cluster(row, k_i, known):
    """Invert one cluster's moments; ``known`` lists its weights or None."""
    if all(x is None for x in known):
        inv = invert(row, k_i)
        return inv.psd, inv.condition
    if all(x is not None for x in known):
        return solve_known_weights(row, known, k_i), float("nan")
    mask = [x is not None for x in known]
    vals = [0.0 if x is None else x for x in known]
    return solve_partial_weights(row, mask, vals, k_i), float("nan")


def _nearest_neighbour(assignment, i):
    left = assignment.gap_before(i) if i > 0 else np.inf
    right = assignment.gap_before(i + 1) if i + 1 < assignment.m else np.inf
    return i - 1 if left <= right else i + 1


def _groups_merging(m, i, j):
    lo, hi = min(i, j), max(i, j)
    return [[c] for c in range(lo)] + [[lo, hi]] + [[c] for c in range(hi + 1, m)]


def _merge_orders(orders, groups):
    return None if orders is None else tuple(sum(orders[c] for c in g) for g in groups)


def _attempt(sample, assignment, k, orders, known):
    m = assignment.m
    depth = k - m + 1
    L = 2 * depth - 1
    if L > MAX_ORDER:
        raise DomainError(f"k - m + 1 = {depth} atoms in one cluster exceeds the supported order")
    table = moment_table(sample, assignment, L)
    scores = {}
    if orders is not None:
        part = Partition(orders)
    elif m == 1:
        part = Partition((k,))
    elif m == k:
        part = Partition((1,) * k)
    else:
        scores = score_partitions(table, k, m)
        part = estimate_partition(table, k, m)
    pieces, conds = [], []
    start = 0
    for i, k_i in enumerate(part):
        kw = [None] * k_i if known is None else list(known[start : start + k_i])
        try:
            psd, cond = _solve_cluster(table.row(i)[: 2 * k_i], k_i, kw)
        except (InversionError, ConvergenceError) as err:
            err.cluster = i
            raise
        pieces.append(psd)
        conds.append(cond)
        start += k_i
    return table, part, pieces, conds, scores


def _run(sample: EigenSample, config: EstimationConfig) -> EstimationResult:
    t0 = time.perf_counter()
    mus = zeros_of_companion(sample)
    assignment = cluster_eigenvalues(
        sample, config.m, boundaries=config.boundaries, counts=config.counts, mus=mus
    )
    orders = config.partition
    if config.merge_plan is not None:
        groups = [list(g) for g in config.merge_plan]
        assignment = assignment.merged(groups)
        orders = _merge_orders(orders, groups)
    if config.k < assignment.m:
        raise DomainError(f"k={config.k} is smaller than the number of clusters m={assignment.m}")
    events = []
    while True:
        try:
            table, part, pieces, conds, scores = _attempt(
                sample, assignment, config.k, orders, config.known_weights
            )
            break
        except (InversionError, ConvergenceError) as err:
            i = err.cluster
            stage = getattr(err, "stage", "newton")
            if not config.fallback or assignment.m == 1:
                diag = {"fallback_events": events, "failed_cluster": i + 1, "failed_stage": stage}
                raise EstimationError(f"cluster {i + 1} failed at stage {stage}: {err}", diag) from err
            j = _nearest_neighbour(assignment, i)
            groups = _groups_merging(assignment.m, i, j)
            events.append(f"cluster {i + 1} failed at {stage}; merged clusters {min(i, j) + 1}-{max(i, j) + 1}")
            assignment = assignment.merged(groups)
            orders = _merge_orders(orders, groups)
    atoms = np.concatenate([p.atoms for p in pieces])
    weights = np.concatenate([p.weights for p in pieces])
    if np.any(np.diff(atoms) <= 0):
        raise EstimationError("atoms of neighbouring clusters overlap", {"atoms": atoms.tolist()})
    theta = DiscretePSD(atoms, weights / weights.sum())
    diag = {
        "backend": kernels.BACKEND,
        "clusters": assignment.m,
        "cluster_sizes": list(assignment.counts),
        "partition": list(part),
        "full_moment": assignment.m == 1,
        "fallback_events": events,
        "condition_numbers": [float(c) for c in conds],
        "weight_sum_before_renormalisation": float(weights.sum()),
        "seconds": time.perf_counter() - t0,
    }
    if scores:
        diag["g_hat"] = {tuple(c): v for c, v in scores.items()}
    return EstimationResult(theta, part, table, assignment, diag)


def lme(sample: EigenSample, config: EstimationConfig) -> EstimationResult:
    """Local moment estimator on the clusters as given (no merge plan)."""
    if config.merge_plan is not None:
        raise DomainError("lme takes no merge plan; use glme")
    return _run(sample, config)


def glme(sample: EigenSample, config: EstimationConfig) -> EstimationResult:
    """Local moment estimator after merging clusters per ``config.merge_plan``."""
    if config.merge_plan is None:
        raise DomainError("glme needs a merge plan")
    return _run(sample, config)


def estimate(sample: EigenSample, config: EstimationConfig) -> EstimationResult:
    """Run lme or glme as the config asks, with the configured fallback."""
    try:
        return glme(sample, config) if config.merge_plan is not None else lme(sample, config)
    except NumericalError as err:
        raise EstimationError(str(err), {"failed_stage": "moments"}) from err
