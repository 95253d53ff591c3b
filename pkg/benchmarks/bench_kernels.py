#!/usr/bin/env python3
"""Benchmark the compiled consensus kernel against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [n_points] [iterations] [repeats]

The workload mirrors the per-frame robust fit: score `iterations` candidate
affine models over `n_points` disparity/inverse-depth pairs.
"""

import sys
import time

import numpy as np

from trapdist import _kernels_py

try:
    from trapdist import _kernels as _compiled
except ImportError:
    _compiled = None


def make_workload(n_points: int, iterations: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.1, 20.0, n_points)
    y = 0.02 * x + 0.01 + rng.normal(0.0, 0.002, n_points)
    outliers = rng.choice(n_points, n_points // 4, replace=False)
    y[outliers] = rng.uniform(y.min(), y.max(), outliers.size)
    samples = np.ascontiguousarray(
        rng.integers(0, n_points, (iterations, 2)), dtype=np.int64
    )
    return x, y, samples


def bench(fn, x, y, samples, repeats: int) -> tuple[float, tuple]:
    best = float("inf")
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn(x, y, samples, 0.01)
        best = min(best, time.perf_counter() - start)
    return best, result


def main() -> int:
    n_points = int(sys.argv[1]) if len(sys.argv) > 1 else 100_000
    iterations = int(sys.argv[2]) if len(sys.argv) > 2 else 500
    repeats = int(sys.argv[3]) if len(sys.argv) > 3 else 5

    x, y, samples = make_workload(n_points, iterations)
    print(f"consensus scoring: {n_points} points x {iterations} iterations "
          f"(best of {repeats})")

    t_py, r_py = bench(_kernels_py.ransac_consensus, x, y, samples, repeats)
    print(f"  numpy fallback : {t_py * 1e3:9.2f} ms   "
          f"(m={r_py[0]:.5f}, c={r_py[1]:.5f}, inliers={r_py[2]})")

    if _compiled is None:
        print("  cython kernel  : not built (pip install -e . --no-build-isolation)")
        return 0

    t_cy, r_cy = bench(_compiled.ransac_consensus, x, y, samples, repeats)
    print(f"  cython kernel  : {t_cy * 1e3:9.2f} ms   "
          f"(m={r_cy[0]:.5f}, c={r_cy[1]:.5f}, inliers={r_cy[2]})")
    print(f"  speedup        : {t_py / t_cy:9.2f} x")
    if r_py != r_cy:
        print("  WARNING: backends disagree!")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
