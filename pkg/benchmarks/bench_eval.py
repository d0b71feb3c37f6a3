"""Benchmark the batched jet evaluators: numba kernel vs pure numpy.

Both paths are timed in one process when numba imports; the numba row is
skipped otherwise.  The same term table and points feed both kernels, and
results are cross-checked before timing.

Usage: python3 benchmarks/bench_eval.py [--points N] [--terms T] [--repeat R]
"""

from __future__ import annotations

import argparse
import random
import time
from fractions import Fraction

import numpy as np

from germglue.jets import Jet
from germglue.sampling import _eval_numpy, term_table


def random_jet(rng: random.Random, num_vars: int, order: int, terms: int) -> Jet:
    from germglue.scalars import Coeff

    out = {}
    while len(out) < terms:
        exp = [0] * num_vars
        for _ in range(rng.randrange(order + 1)):
            exp[rng.randrange(num_vars)] += 1
        out[tuple(exp)] = Coeff(Fraction(rng.randrange(-99, 100), 7))
    return Jet(num_vars, order, out)


def best_of(repeat: int, fn, *args) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=200_000)
    parser.add_argument("--terms", type=int, default=60)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = random.Random(0)
    f = random_jet(rng, num_vars=3, order=6, terms=args.terms)
    exps, coeffs = term_table(f)
    pts = (np.random.default_rng(0).standard_normal((args.points, 3, 2))
           .astype(np.float64))
    points = np.ascontiguousarray(pts[..., 0] + 1j * pts[..., 1])

    rows = []
    numpy_time = best_of(args.repeat, _eval_numpy, exps, coeffs, points)
    rows.append(("numpy", numpy_time))

    try:
        from numba import njit

        @njit(cache=False)
        def numba_kernel(exps, coeffs, points):
            n_pts = points.shape[0]
            n_terms = exps.shape[0]
            n_vars = exps.shape[1]
            out = np.zeros(n_pts, dtype=np.complex128)
            for p in range(n_pts):
                acc = 0.0 + 0.0j
                for t in range(n_terms):
                    term = coeffs[t]
                    for v in range(n_vars):
                        k = exps[t, v]
                        for _ in range(k):
                            term = term * points[p, v]
                    acc += term
                out[p] = acc
            return out

        check = numba_kernel(exps, coeffs, points[:100])
        reference = _eval_numpy(exps, coeffs, points[:100])
        drift = float(np.abs(check - reference).max())
        if drift > 1e-9:
            raise RuntimeError(f"kernel disagreement: {drift}")
        numba_time = best_of(args.repeat, numba_kernel, exps, coeffs, points)
        rows.append(("numba", numba_time))
    except ImportError:
        print("numba not importable; timing the numpy path only")

    print(f"jet: 3 vars, order 6, {args.terms} terms; "
          f"{args.points} points; best of {args.repeat}")
    for name, seconds in rows:
        rate = args.points / seconds / 1e6
        print(f"  {name:>6}: {seconds * 1e3:8.2f} ms   {rate:6.2f} Mpts/s")
    if len(rows) == 2:
        print(f"  speedup: {rows[0][1] / rows[1][1]:.2f}x (numba over numpy)")


if __name__ == "__main__":
    main()
