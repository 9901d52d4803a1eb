#!/usr/bin/env python3
"""Benchmark the compiled closure-mass kernel against the NumPy fallback.

Times the raw mass kernel and the full score_profile pipeline on frontier-
window sizes spanning the practical range (B_max 16..64, with and without
history columns).

Usage: python benchmarks/bench_kernels.py [--repeats 2000]
"""

import argparse
import time

import numpy as np

from geoblock._kernels import _profile_np

try:
    from geoblock._kernels import _profile_cy
except ImportError:
    _profile_cy = None

from geoblock.attention import FusedMap, WindowSpec
from geoblock.scoring import ScoreParams, score_profile


def bench(fn, repeats):
    best = float("inf")
    for _ in range(5):  # 5 timing rounds, keep the best
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best


def kernel_cases():
    rng = np.random.default_rng(0)
    for rows, hist in ((16, 0), (32, 0), (64, 0), (32, 32), (64, 64)):
        w = rng.random((rows, hist + rows))
        splits = np.arange(4, rows + 1, dtype=np.int64)
        yield f"{rows}x{hist + rows}", w, hist, splits


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=2000)
    args = parser.parse_args()

    if _profile_cy is None:
        print("compiled kernel not built; benchmarking the NumPy backend only")

    print(f"{'case':>10} {'numpy':>12} {'compiled':>12} {'speedup':>9}")
    for name, w, hist, splits in kernel_cases():
        t_np = bench(lambda: _profile_np.profile_masses(w, hist, 4, splits), args.repeats)
        if _profile_cy is not None:
            t_cy = bench(lambda: _profile_cy.profile_masses(w, hist, 4, splits), args.repeats)
            print(f"{name:>10} {t_np * 1e6:>10.1f}us {t_cy * 1e6:>10.1f}us {t_np / t_cy:>8.1f}x")
        else:
            print(f"{name:>10} {t_np * 1e6:>10.1f}us {'-':>12} {'-':>9}")

    # end-to-end: one boundary-inference profile per call
    rng = np.random.default_rng(1)
    w = rng.random((32, 32))
    fm = FusedMap(w, WindowSpec(0, 32))
    params = ScoreParams(min_block=4, delta=0.1, max_block=64)
    t = bench(lambda: score_profile(fm, params), max(200, args.repeats // 10))
    print(f"\nscore_profile 32x32 via selected backend: {t * 1e6:.1f}us/call")


if __name__ == "__main__":
    main()
