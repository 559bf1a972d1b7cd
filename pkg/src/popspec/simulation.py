"""Monte Carlo harness that runs estimator variants over replicated Gaussian
samples from a discrete population spectrum and summarises the results."""

from __future__ import annotations

import configparser
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .empirical import EigenSample
from .errors import DomainError, NumericalError, PopspecError
from .forward import divide_psd, lsd_quantiles, support_intervals
from .pipeline import EstimationConfig, estimate
from .psd import DiscretePSD

MASS_TOL = 1e-10


def multiplicities(weights, p: int) -> np.ndarray:
    """Integer counts ``~ p * weights`` summing to ``p`` (largest remainder)."""
    raw = np.asarray(weights, dtype=float) * p
    base = np.floor(raw).astype(int)
    short = p - int(base.sum())
    order = np.argsort(-(raw - base), kind="stable")
    base[order[:short]] += 1
    return base


def generate_eigen_sample(theta: DiscretePSD, p: int, n: int, seed) -> EigenSample:
    """Nonzero eigenvalues of ``S^{1/2} X X^T S^{1/2} / n`` with ``S`` diagonal
    carrying each atom with its rounded multiplicity and ``X`` standard normal."""
    rng = np.random.default_rng(seed)
    sigma = np.repeat(theta.atoms, multiplicities(theta.weights, p))
    y = np.sqrt(sigma)[:, None] * rng.standard_normal((p, n))
    if p <= n:
        mat = y @ y.T / n
    else:
        mat = y.T @ y / n  # same nonzero spectrum, smaller matrix
    try:
        lam = np.linalg.eigvalsh(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolve failed: {exc}") from exc
    return EigenSample(lam, p, n)


def ghost_sample(theta: DiscretePSD, p: int, n: int) -> EigenSample:
    """Deterministic "sample": LSD quantiles at levels ``(j - 1/2)/p``."""
    if p >= n:
        raise DomainError("ghost samples need p < n")
    levels = (np.arange(1, p + 1) - 0.5) / p
    return EigenSample(lsd_quantiles(theta, p / n, levels), p, n)


def wasserstein(g1: DiscretePSD, g2: DiscretePSD) -> float:
    """``int_0^1 |Q_1(t) - Q_2(t)| dt`` evaluated segment by segment."""
    for g in (g1, g2):
        if abs(g.total_mass - 1.0) > MASS_TOL:
            raise DomainError(f"total mass {g.total_mass!r} is not 1")
    c1 = np.cumsum(g1.weights)
    c2 = np.cumsum(g2.weights)
    cuts = np.union1d(c1[:-1], c2[:-1])
    edges = np.concatenate([[0.0], cuts, [1.0]])
    mids = 0.5 * (edges[1:] + edges[:-1])
    q1 = g1.atoms[np.minimum(np.searchsorted(c1, mids), g1.k - 1)]
    q2 = g2.atoms[np.minimum(np.searchsorted(c2, mids), g2.k - 1)]
    return float(np.sum(np.abs(q1 - q2) * np.diff(edges)))


# -- experiment specification --------------------------------------------------


@dataclass(frozen=True)
class Variant:
    """One estimator configuration.

    ``division`` is ``model`` (cluster boundaries from the model's support
    gaps), ``gaps`` (split the sample at its ``m - 1`` widest gaps) or
    ``counts`` (one cluster per atom, sized by the multiplicities).
    ``merge`` groups clusters (0-based); ``known_weights`` has ``None`` for
    free entries.
    """

    name: str
    division: str = "model"
    m: int | None = None
    merge: tuple | None = None
    known_weights: tuple | None = None
    partition: tuple | None = None

    def __post_init__(self):
        if self.division not in ("model", "gaps", "counts"):
            raise DomainError(f"unknown division rule {self.division!r}")
        if self.division == "gaps" and self.m is None:
            raise DomainError("division=gaps needs m")

    def config(self, theta: DiscretePSD, p: int, n: int) -> EstimationConfig:
        kw = dict(merge_plan=self.merge, known_weights=self.known_weights, partition=self.partition)
        if self.division == "model":
            bnd = tuple(support_intervals(theta, p / n).boundaries().tolist())
            return EstimationConfig(theta.k, boundaries=bnd, **kw)
        if self.division == "gaps":
            return EstimationConfig(theta.k, m=self.m, **kw)
        if p > n:
            raise DomainError("division=counts needs p <= n")
        return EstimationConfig(theta.k, counts=tuple(multiplicities(theta.weights, p).tolist()), **kw)


@dataclass(frozen=True)
class ExperimentSpec:
    model: DiscretePSD
    dimensions: tuple
    replications: int
    variants: tuple
    seed: int

    def __post_init__(self):
        if not self.dimensions:
            raise DomainError("at least one (p, n) pair is needed")
        ratios = [p / n for p, n in self.dimensions]
        if max(ratios) - min(ratios) > 1e-12:
            raise DomainError(f"p/n must be the same for every dimension pair, got {ratios}")
        if self.replications < 1:
            raise DomainError("replications must be positive")
        if abs(self.model.total_mass - 1.0) > MASS_TOL:
            raise DomainError("the model must be a probability measure")
        names = [v.name for v in self.variants]
        if not names or len(set(names)) != len(names):
            raise DomainError("variants need distinct names")

    @property
    def c(self) -> float:
        p, n = self.dimensions[0]
        return p / n


def parse_merge_plan(text):
    # "1+2, 3" -> ((0, 1), (2,)), 1-based in the file
    return tuple(tuple(int(t) - 1 for t in grp.split("+")) for grp in text.split(","))


def parse_known_weights(text):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        out.append(None if tok in ("-", "?", "") else float(tok))
    return tuple(out)


def read_spec(path, replications: int | None = None, seed: int | None = None) -> ExperimentSpec:
    """Read an INI experiment file with an ``[experiment]`` section and one
    ``[variant:NAME]`` section per estimator. Paths are relative to the file."""
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not cp.read(path):
        raise DomainError(f"cannot read experiment file {path}")
    if "experiment" not in cp:
        raise DomainError("missing [experiment] section")
    ex = cp["experiment"]
    if "model_file" in ex:
        model = DiscretePSD.load(path.parent / ex["model_file"])
    elif "model" in ex:
        pairs = [tok.split(":") for tok in ex["model"].split(",")]
        model = DiscretePSD([float(a) for a, _ in pairs], [float(w) for _, w in pairs])
    else:
        raise DomainError("[experiment] needs model or model_file")
    dims = tuple(tuple(int(x) for x in tok.strip().lower().split("x")) for tok in ex["dimensions"].split(","))
    reps = replications if replications is not None else ex.getint("replications", 100)
    seed = seed if seed is not None else ex.getint("seed", 0)
    variants = []
    for sec in cp.sections():
        if not sec.startswith("variant:"):
            continue
        v = cp[sec]
        variants.append(
            Variant(
                name=sec.split(":", 1)[1].strip(),
                division=v.get("division", "model"),
                m=v.getint("m") if "m" in v else None,
                merge=parse_merge_plan(v["merge"]) if "merge" in v else None,
                known_weights=parse_known_weights(v["known_weights"]) if "known_weights" in v else None,
                partition=tuple(int(t) for t in v["partition"].split(",")) if "partition" in v else None,
            )
        )
    return ExperimentSpec(model, dims, reps, tuple(variants), seed)


# -- running --------------------------------------------------------------------


def _true_local_first_moments(theta, c):
    div = divide_psd(theta, support_intervals(theta, c))
    return [float(np.sum(part.atoms * part.weights)) for part in div.parts]


def _replicate(args):
    spec, p, n, rep = args
    sample = generate_eigen_sample(spec.model, p, n, (spec.seed, p, n, rep))
    truth = _true_local_first_moments(spec.model, p / n)
    out = {}
    for var in spec.variants:
        t0 = time.perf_counter()
        try:
            res = estimate(sample, var.config(spec.model, p, n))
        except PopspecError as err:
            out[var.name] = {"failed": type(err).__name__, "seconds": time.perf_counter() - t0}
            continue
        rec = {
            "atoms": res.theta_hat.atoms.tolist(),
            "weights": res.theta_hat.weights.tolist(),
            "d": wasserstein(spec.model, res.theta_hat),
            "partition": tuple(res.partition),
            "seconds": time.perf_counter() - t0,
        }
        if res.assignment.m == len(truth) and not res.diagnostics["fallback_events"]:
            rec["gamma1_err"] = [abs(res.table.row(i)[1] - g) for i, g in enumerate(truth)]
        out[var.name] = rec
    return p, n, rep, out


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    records: dict = field(default_factory=dict)  # (variant, p, n) -> list of per-rep dicts

    def _stats(self, variant, p, n):
        recs = [r for r in self.records[(variant, p, n)] if "failed" not in r]
        k = self.spec.model.k
        rows = []
        if recs:
            atoms = np.array([r["atoms"] for r in recs])
            weights = np.array([r["weights"] for r in recs])
            cols = [(f"a{j + 1}", atoms[:, j]) for j in range(k)]
            cols += [(f"w{j + 1}", weights[:, j]) for j in range(k)]
            cols.append(("d", np.array([r["d"] for r in recs])))
            errs = [r["gamma1_err"] for r in recs if "gamma1_err" in r]
            if errs:
                errs = np.array(errs)
                cols += [(f"gamma{i + 1}_1_abs_err", errs[:, i]) for i in range(errs.shape[1])]
            for name, vals in cols:
                sd = float(np.std(vals, ddof=1)) if vals.size > 1 else math.nan
                rows.append((name, float(np.mean(vals)), sd, int(vals.size)))
        return rows

    def mean(self, variant, p, n, parameter) -> float:
        for name, mean, _, _ in self._stats(variant, p, n):
            if name == parameter:
                return mean
        raise KeyError(parameter)

    def sd(self, variant, p, n, parameter) -> float:
        for name, _, sd, _ in self._stats(variant, p, n):
            if name == parameter:
                return sd
        raise KeyError(parameter)

    def values(self, variant, p, n, key):
        return [r[key] for r in self.records[(variant, p, n)] if key in r]

    def partition_frequencies(self, variant, p, n) -> dict:
        freq = {}
        for r in self.records[(variant, p, n)]:
            key = "failed" if "failed" in r else "-".join(str(x) for x in r["partition"])
            freq[key] = freq.get(key, 0) + 1
        return dict(sorted(freq.items()))

    def failures(self, variant, p, n) -> int:
        return sum("failed" in r for r in self.records[(variant, p, n)])

    def seconds_per_replication(self, variant, p, n) -> float:
        return float(np.mean([r["seconds"] for r in self.records[(variant, p, n)]]))

    def _keys(self):
        for p, n in self.spec.dimensions:
            for v in self.spec.variants:
                yield v.name, p, n

    def to_csv(self, timing: bool = False) -> str:
        buf = io.StringIO()
        buf.write("variant,p,n,parameter,mean,sd,count\n")
        for name, p, n in self._keys():
            for par, mean, sd, cnt in self._stats(name, p, n):
                buf.write(f"{name},{p},{n},{par},{mean:.17g},{sd:.17g},{cnt}\n")
            for part, cnt in self.partition_frequencies(name, p, n).items():
                buf.write(f"{name},{p},{n},partition={part},{cnt},,{cnt}\n")
            buf.write(f"{name},{p},{n},failures,{self.failures(name, p, n)},,{len(self.records[(name, p, n)])}\n")
            if timing:
                buf.write(f"{name},{p},{n},seconds,{self.seconds_per_replication(name, p, n):.6g},,\n")
        return buf.getvalue()

    def to_text(self, timing: bool = False) -> str:
        k = self.spec.model.k
        params = [f"a{j + 1}" for j in range(k)] + [f"w{j + 1}" for j in range(k)] + ["d"]
        buf = io.StringIO()
        buf.write(f"replications: {self.spec.replications}, seed: {self.spec.seed}; St. D. uses the n-1 denominator\n")
        buf.write("true:" + "".join(f" {x:.4f}" for x in (*self.spec.model.atoms, *self.spec.model.weights)) + "\n")
        for p, n in self.spec.dimensions:
            buf.write(f"\n(p, n) = ({p}, {n})\n")
            buf.write(f"{'':<12}{'':<8}" + "".join(f"{h:>10}" for h in params) + "\n")
            for v in self.spec.variants:
                stats = {name: (mean, sd) for name, mean, sd, _ in self._stats(v.name, p, n)}
                for label, idx in (("Mean", 0), ("St. D.", 1)):
                    cells = "".join(
                        f"{stats[h][idx]:>10.4f}" if h in stats else f"{'-':>10}" for h in params
                    )
                    buf.write(f"{v.name:<12}{label:<8}{cells}\n")
                freq = ", ".join(f"{key}: {cnt}" for key, cnt in self.partition_frequencies(v.name, p, n).items())
                buf.write(f"{'':<12}partitions {freq}\n")
                if timing:
                    buf.write(f"{'':<12}seconds/replication {self.seconds_per_replication(v.name, p, n):.3f}\n")
        return buf.getvalue()


def run_experiment(spec: ExperimentSpec, threads: int | None = 1) -> ExperimentReport:
    """Run every variant on every replication; results do not depend on ``threads``.

    Variant configurations are validated up front, so a bad experiment file
    fails at once instead of counting as per-replication failures.
    """
    for p, n in spec.dimensions:
        for var in spec.variants:
            var.config(spec.model, p, n)
    tasks = [(spec, p, n, rep) for p, n in spec.dimensions for rep in range(spec.replications)]
    if threads is not None and threads <= 1:
        results = [_replicate(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_replicate, tasks, chunksize=max(1, len(tasks) // 64)))
    report = ExperimentReport(spec)
    for p, n, rep, out in sorted(results, key=lambda r: (r[0], r[1], r[2])):
        for name, rec in out.items():
            report.records.setdefault((name, p, n), []).append(rec)
    return report
