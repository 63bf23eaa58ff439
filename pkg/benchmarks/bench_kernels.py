#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Covers the two hot loops: per-cell Gaussian log-likelihood scoring (the
online localization path) and squared-exponential kernel matrices (the
training path). Checks agreement before timing.
"""

import argparse
import time

import numpy as np

from ips import _pykernels

try:
    from ips import _native
except ImportError:
    _native = None


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    if _native is None:
        print("compiled extension not available; nothing to compare")
        return 1

    rng = np.random.default_rng(0)
    rows = []

    # localization scoring: 12 radios over a 20x20 and a 50x50 grid
    for n_ap, n_cells in [(12, 400), (12, 2500), (24, 2500)]:
        obs = rng.uniform(-90, -30, n_ap)
        means = np.ascontiguousarray(rng.uniform(-90, -30, (n_ap, n_cells)))
        stds = np.ascontiguousarray(rng.uniform(1, 8, (n_ap, n_cells)))
        a = _native.gaussian_loglik(obs, means, stds)
        b = _pykernels.gaussian_loglik(obs, means, stds)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-9), "backend disagreement"
        t_native = timeit(lambda: _native.gaussian_loglik(obs, means, stds), args.repeat)
        t_pure = timeit(lambda: _pykernels.gaussian_loglik(obs, means, stds), args.repeat)
        rows.append((f"gaussian_loglik {n_ap}x{n_cells}", t_native, t_pure))

    # kernel matrices: training-sized and grid-prediction-sized
    for n, m in [(196, 196), (196, 400), (400, 2500)]:
        pts_a = np.ascontiguousarray(rng.uniform(0, 14, (n, 2)))
        pts_b = np.ascontiguousarray(rng.uniform(0, 14, (m, 2)))
        a = _native.se_kernel(pts_a, pts_b, 6.0, 3.0)
        b = _pykernels.se_kernel(pts_a, pts_b, 6.0, 3.0)
        assert np.allclose(a, b, rtol=1e-12), "backend disagreement"
        t_native = timeit(lambda: _native.se_kernel(pts_a, pts_b, 6.0, 3.0), args.repeat)
        t_pure = timeit(lambda: _pykernels.se_kernel(pts_a, pts_b, 6.0, 3.0), args.repeat)
        rows.append((f"se_kernel {n}x{m}", t_native, t_pure))

    print(f"{'case':<28} {'native':>10} {'numpy':>10} {'speedup':>8}")
    for name, t_native, t_pure in rows:
        print(f"{name:<28} {t_native * 1e6:>8.1f}us {t_pure * 1e6:>8.1f}us "
              f"{t_pure / t_native:>7.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
