"""Time the compiled kernel core against the pure-Python fallback.

    python3 benchmarks/bench_backends.py [--repeat 5] [--sizes 100 400 1000]

Prints one CSV row per (operation, size, backend) with the best-of-N wall
time and the speedup of the compiled core over the fallback.
"""

import argparse
import csv
import sys
import timeit

import numpy as np

from mfopt import _backend
from mfopt.gp import KernelSpec, fit_gp
from mfopt.sampling import CandidatePool, greedy_select


def cases(n, rng):
    X = rng.uniform(size=(n, 3))
    y = np.sin(3 * X).sum(axis=1)
    ls = np.array([0.3, 0.5, 0.7])
    R = rng.standard_normal((n * 10, 32))
    q = rng.standard_normal(32)
    q /= np.linalg.norm(q)
    pool = CandidatePool(None, rng.standard_normal((n * 5, 16)))
    spec = KernelSpec("matern52", ls, noise_variance=1e-6)

    def gram():
        _backend.kernels.ard_gram(X, X, ls, 1.0, 1, 0)

    def gram_grad():
        _backend.kernels.ard_gram_grad(X, ls, 1.0, 1, 0)

    def deflate():
        _backend.kernels.deflate(R.copy(), q)

    def gp_fit():
        fit_gp(X[: min(n, 200)], y[: min(n, 200)], spec, restarts=2, seed=0)

    def greedy():
        greedy_select(pool, 16)

    return {"ard_gram": gram, "ard_gram_grad": gram_grad, "deflate": deflate, "gp_fit": gp_fit,
            "greedy_select": greedy}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--sizes", type=int, nargs="+", default=[100, 400, 1000])
    args = p.parse_args(argv)
    backends = _backend.available()
    if "compiled" not in backends:
        print("compiled core not built; timing the fallback only", file=sys.stderr)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["operation", "n", "backend", "seconds", "speedup"])
    for n in args.sizes:
        timings = {}
        for b in backends:
            _backend.use(b)
            for op, fn in cases(n, np.random.default_rng(0)).items():
                fn()  # warm-up
                timings[op, b] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        for (op, b), t in sorted(timings.items()):
            ref = timings.get((op, "python"))
            speed = ref / t if ref and b == "compiled" else 1.0
            out.writerow([op, n, b, f"{t:.6f}", f"{speed:.2f}"])
    _backend.use(backends[0])
    return 0


if __name__ == "__main__":
    sys.exit(main())
