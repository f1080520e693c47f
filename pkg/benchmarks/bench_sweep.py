"""Time the compiled and NumPy Euler characteristic sweeps on random lattice fields.

Two numbers per backend: the kernel alone (activation order precomputed) and
the full ``ec_curve_sweep`` call, which adds the shared sort.

Usage: python benchmarks/bench_sweep.py [--repeat N]
"""
import argparse
import time

import numpy as np

from minkowski_lab import excursion


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if excursion._compiled_sweep is None:
        print("compiled kernels unavailable; only the NumPy path can be timed")
        backends = ("python",)
    else:
        backends = ("python", "compiled", "incremental")
    rng = np.random.default_rng(0)
    cases = [(8, 8), (5, 5, 5), (128, 128), (512, 512), (24, 24, 24), (48, 48, 48)]
    print(f"{'shape':>10s} {'backend':>12s} {'kernel ms':>10s} {'total ms':>10s} {'kernel speedup':>15s}")
    for shape in cases:
        x = rng.standard_normal(shape)
        order = excursion._activation_order(x.ravel())
        ref = excursion._chi_sequence(x, order, False, "python")
        base = None
        for b in backends:
            assert np.array_equal(ref, excursion._chi_sequence(x, order, False, b)), "backends disagree"
            tk = best_of(lambda: excursion._chi_sequence(x, order, False, b), args.repeat)
            tt = best_of(lambda: excursion.ec_curve_sweep(x, backend=b), args.repeat)
            base = base or tk
            print(f"{'x'.join(map(str, shape)):>10s} {b:>12s} {1e3 * tk:10.3f} {1e3 * tt:10.3f} {base / tk:14.2f}x")


if __name__ == "__main__":
    main()
