#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the NumPy fallback.

Times the two hot paths (cyclic Jacobi eigensolver, hitting-time sampler)
on matched inputs and prints a per-size comparison.  Run from the repo
root:

    python benchmarks/bench_kernels.py [--replicas 100000] [--repeats 3]
"""

import argparse
import sys
import time

import numpy as np

from ebmlab.kernels import pyfallback

try:
    from ebmlab.kernels import _core
except ImportError:
    _core = None


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_jacobi(sizes, repeats):
    rng = np.random.default_rng(0)
    print(f"{'jacobi_eigh':<16}{'n':>6}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for n in sizes:
        a = rng.normal(size=(n, n))
        s = (a + a.T) / 2
        t_py = best_of(lambda: pyfallback.jacobi_eigh(s, 1e-12, 100), repeats)
        if _core is None:
            print(f"{'':<16}{n:>6}{t_py:>11.4f}s{'n/a':>12}{'':>10}")
            continue
        t_c = best_of(lambda: _core.jacobi_eigh(s, 1e-12, 100), repeats)
        d1, _, _, _ = _core.jacobi_eigh(s, 1e-12, 100)
        d2, _, _, _ = pyfallback.jacobi_eigh(s, 1e-12, 100)
        agree = np.max(np.abs(np.sort(d1) - np.sort(d2)))
        print(f"{'':<16}{n:>6}{t_py:>11.4f}s{t_c:>11.4f}s{t_py / t_c:>9.1f}x"
              f"   (max eigenvalue diff {agree:.1e})")


def bench_hitting(sizes, replicas, repeats):
    rng = np.random.default_rng(1)
    print(f"{'hitting sampler':<16}{'n':>6}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for n in sizes:
        t = rng.dirichlet(np.ones(n), size=n)
        cum = np.cumsum(t, axis=1)
        mask = np.zeros(n, dtype=np.uint8)
        mask[n - 1] = 1
        args = (cum, mask, 0, replicas, 12345, 10**6)
        t_py = best_of(lambda: pyfallback.simulate_hitting_times(*args), repeats)
        if _core is None:
            print(f"{'':<16}{n:>6}{t_py:>11.4f}s{'n/a':>12}{'':>10}")
            continue
        t_c = best_of(lambda: _core.simulate_hitting_times(*args), repeats)
        a, _ = _core.simulate_hitting_times(*args)
        b, _ = pyfallback.simulate_hitting_times(*args)
        tag = "identical" if np.array_equal(a, b) else "MISMATCH"
        print(f"{'':<16}{n:>6}{t_py:>11.4f}s{t_c:>11.4f}s{t_py / t_c:>9.1f}x"
              f"   (draws {tag})")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64, 128])
    parser.add_argument("--replicas", type=int, default=100_000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    if _core is None:
        print("compiled extension not built; showing fallback only", file=sys.stderr)
    bench_jacobi(args.sizes, args.repeats)
    print()
    bench_hitting(args.sizes, args.replicas, args.repeats)


if __name__ == "__main__":
    main()
