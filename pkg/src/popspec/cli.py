"""Command-line front end. Every subcommand parses, calls the library and
formats; no numerics live here.

Exit codes: 0 success, 1 usage or input error, 2 numerical or estimation
failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .empirical import EigenSample, cluster_eigenvalues
from .errors import DomainError, EstimationError, NumericalError
from .forward import lsd_density, support_intervals
from .partition import estimate_partition, score_partitions
from .pipeline import EstimationConfig, estimate
from .psd import DiscretePSD
from .residues import moment_table
from .simulation import parse_merge_plan, parse_known_weights, read_spec, run_experiment


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text):
    return tuple(float(t) for t in text.split(","))


def _ints(text):
    return tuple(int(t) for t in text.split(","))


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _sample(args):
    return EigenSample.from_file(args.eigs, args.p, args.n)


def _division(args):
    return dict(m=args.m, boundaries=args.boundaries, counts=args.counts)


def _add_sample_args(sp, division=True):
    sp.add_argument("--eigs", required=True, help="file with one sample eigenvalue per line")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    if division:
        grp = sp.add_mutually_exclusive_group(required=True)
        grp.add_argument("--m", type=int, help="split at the m-1 widest gaps")
        grp.add_argument("--boundaries", type=_floats, help="comma-separated split points")
        grp.add_argument("--counts", type=_ints, help="comma-separated cluster sizes")


def cmd_support(args):
    H = DiscretePSD.load(args.model)
    sup = support_intervals(H, args.c)
    lines = ["index,lower,upper,delta_lower,delta_upper"]
    for i, ((lo, hi), (dl, du)) in enumerate(zip(sup.intervals, sup.contour_bounds), 1):
        lines.append(f"{i},{lo:.17g},{hi:.17g},{dl:.17g},{du:.17g}")
    _emit("\n".join(lines) + "\n", args.out)


def cmd_density(args):
    H = DiscretePSD.load(args.model)
    if args.x is not None:
        xs = np.array(args.x)
    else:
        lo, hi, num = args.grid
        xs = np.linspace(lo, hi, int(num))
    dens = lsd_density(xs, H, args.c)
    lines = ["x,value"] + [f"{x:.17g},{d:.17g}" for x, d in zip(xs, np.atleast_1d(dens))]
    _emit("\n".join(lines) + "\n", args.out)


def cmd_moments(args):
    sample = _sample(args)
    assignment = cluster_eigenvalues(sample, **_division(args))
    if args.merge:
        assignment = assignment.merged([list(g) for g in parse_merge_plan(args.merge)])
    _emit(moment_table(sample, assignment, args.L).to_csv(), args.out)


def cmd_partition(args):
    sample = _sample(args)
    assignment = cluster_eigenvalues(sample, **_division(args))
    m = assignment.m
    table = moment_table(sample, assignment, 2 * (args.k - m + 1) - 1)
    best = estimate_partition(table, args.k, m)
    lines = [f"# partition={'-'.join(map(str, best))}", "partition,g_hat"]
    if m < args.k:
        scores = score_partitions(table, args.k, m, prune=not args.no_prune)
        lines += [f"{'-'.join(map(str, c))},{v:.17g}" for c, v in scores.items()]
    else:
        lines.append(f"{'-'.join(map(str, best))},nan")
    _emit("\n".join(lines) + "\n", args.out)


def cmd_estimate(args):
    sample = _sample(args)
    config = EstimationConfig(
        args.k,
        **_division(args),
        merge_plan=parse_merge_plan(args.merge) if args.merge else None,
        partition=args.partition,
        known_weights=parse_known_weights(args.known_weights) if args.known_weights else None,
        fallback=not args.no_fallback,
    )
    res = estimate(sample, config)
    diag = res.diagnostics_text()
    if args.out:
        Path(args.out).write_text(res.theta_hat.to_text())
        sys.stdout.write(diag)
    else:
        sys.stdout.write(res.theta_hat.to_text() + diag)


def cmd_simulate(args):
    spec = read_spec(args.spec, replications=args.reps, seed=args.seed)
    report = run_experiment(spec, threads=args.threads)
    _emit(report.to_csv(timing=args.timing), args.out)
    text = report.to_text(timing=args.timing)
    if args.text:
        Path(args.text).write_text(text)
    elif args.out:
        sys.stdout.write(text)


def build_parser():
    parser = _Parser(prog="popspec", description="Population spectral distribution estimation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("support", help="support intervals of the limiting distribution")
    sp.add_argument("--model", required=True)
    sp.add_argument("--c", type=float, required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_support)

    sp = sub.add_parser("density", help="limiting spectral density")
    sp.add_argument("--model", required=True)
    sp.add_argument("--c", type=float, required=True)
    grp = sp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--x", type=_floats, help="comma-separated abscissas")
    grp.add_argument("--grid", type=_floats, help="lo,hi,count")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_density)

    sp = sub.add_parser("moments", help="local moment estimates per cluster")
    _add_sample_args(sp)
    sp.add_argument("--L", type=int, default=3, help="highest moment order")
    sp.add_argument("--merge", help="merge plan, e.g. '1+2,3'")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_moments)

    sp = sub.add_parser("partition", help="estimated atoms per cluster and the score table")
    _add_sample_args(sp)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--no-prune", action="store_true", help="score every candidate")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_partition)

    sp = sub.add_parser("estimate", help="estimate the population spectrum")
    _add_sample_args(sp)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--merge", help="merge plan, e.g. '1+2,3'")
    sp.add_argument("--partition", type=_ints, help="forced atoms per cluster, e.g. 1,1,2")
    sp.add_argument("--known-weights", help="one entry per atom, '-' when unknown")
    sp.add_argument("--no-fallback", action="store_true", help="fail instead of merging clusters")
    sp.add_argument("--out", help="write the estimate here; diagnostics go to stdout")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--timing", action="store_true", help="include wall-clock columns")
    sp.add_argument("--out", help="CSV report path")
    sp.add_argument("--text", help="plain-text table path")
    sp.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(err, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except (DomainError, OSError) as err:
        print(f"popspec {args.command}: {err}", file=sys.stderr)
        return 1
    except (NumericalError, EstimationError) as err:
        print(f"popspec {args.command}: {err}", file=sys.stderr)
        diag = getattr(err, "diagnostics", None)
        for key, val in (diag or {}).items():
            print(f"{key}={val}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
