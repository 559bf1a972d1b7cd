"""Compare the compiled and numpy kernels on simulated samples.

    python3 benchmarks/bench_kernels.py [--reps 20] [--sizes 320,1000,3000]

Prints one line per kernel and sample size with the median time of each
backend and the largest disagreement between them.
"""

import argparse
import timeit

import numpy as np

from popspec import DiscretePSD, generate_eigen_sample
from popspec import _pykernels

try:
    from popspec import _ckernels
except ImportError:
    _ckernels = None


def _median(fn, reps):
    return float(np.median(timeit.repeat(fn, number=1, repeat=reps)))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--sizes", default="320,1000,3000")
    ap.add_argument("--order", type=int, default=7, help="highest derivative order")
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the numpy backend is available")
    theta = DiscretePSD([1, 7, 15, 25], [0.5, 0.25, 0.125, 0.125])
    print(f"{'kernel':<24}{'p':>6}{'numpy s':>12}{'cython s':>12}{'speed-up':>10}{'max diff':>11}")
    for p in (int(t) for t in args.sizes.split(",")):
        n = int(p / 0.32)
        lam = generate_eigen_sample(theta, p, n, 0).lambdas
        mus = _pykernels.companion_zeros(lam, n)
        pts = mus[1:] if mus[0] == 0 else mus
        cases = [
            ("companion_zeros", lambda b: b.companion_zeros(lam, n)),
            ("companion_derivatives", lambda b: b.companion_derivatives(pts, lam, n, args.order)),
        ]
        for name, call in cases:
            t_py = _median(lambda: call(_pykernels), args.reps)
            if _ckernels is None:
                print(f"{name:<24}{p:>6}{t_py:>12.2e}{'-':>12}{'-':>10}{'-':>11}")
                continue
            t_c = _median(lambda: call(_ckernels), args.reps)
            a, b = call(_pykernels), call(_ckernels)
            diff = float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a))))
            print(f"{name:<24}{p:>6}{t_py:>12.2e}{t_c:>12.2e}{t_py / t_c:>9.1f}x{diff:>11.1e}")


if __name__ == "__main__":
    main()
