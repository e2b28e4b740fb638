#!/usr/bin/env python3
"""Benchmark the compiled dynamic-programming kernels against the pure-numpy
fallback.

Both backends compute the CTC and CTL forward-backward passes; results are
checked to agree before timing.  Run from the repository root:

    python3 benchmarks/bench_kernels.py [--repeats 20]
"""

import argparse
import time

import numpy as np

from seqlab.backend import get_backends

CASES = [
    # (frames, classes, target symbols)
    (50, 4, 4),
    (200, 4, 8),
    (500, 10, 16),
    (1000, 10, 32),
]


def make_ctc_case(rng, T, C, S):
    K = 2 * C + 1
    probs = rng.uniform(0.05, 1.0, size=(T, K))
    probs /= probs.sum(axis=1, keepdims=True)
    labels = rng.integers(1, K, size=S)
    ext = np.zeros(2 * S + 1, dtype=np.int64)
    ext[1::2] = labels
    return probs, ext


def make_ctl_case(rng, T, C, S):
    z = rng.uniform(0.0, 0.6, size=(T, 2 * C))
    sym = rng.integers(0, 2 * C, size=S).astype(np.int64)
    return z, sym


def bench(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=20,
                    help="timing repeats per case (best-of)")
    args = ap.parse_args()

    backends = get_backends()
    print(f"backends: {', '.join(sorted(backends))}")
    if len(backends) < 2:
        print("compiled backend not built; timing the fallback only")

    rng = np.random.default_rng(0)
    header = f"{'kernel':<6} {'T':>5} {'C':>3} {'S':>3}"
    names = sorted(backends)
    for n in names:
        header += f" {n + ' (ms)':>14}"
    if len(names) == 2:
        header += f" {'speedup':>9}"
    print(header)
    print("-" * len(header))

    for kernel, maker in (("ctc", make_ctc_case), ("ctl", make_ctl_case)):
        for T, C, S in CASES:
            case = maker(rng, T, C, S)
            results = {}
            times = {}
            for name in names:
                fn = getattr(backends[name], f"{kernel}_forward_backward")
                results[name] = fn(*case)
                times[name] = bench(fn, case, args.repeats)
            if len(names) == 2:
                a, b = (results[n] for n in names)
                assert abs(a[0] - b[0]) <= 1e-9 * max(1.0, abs(b[0]))
                assert np.allclose(a[1], b[1], rtol=1e-9, atol=1e-12)
            row = f"{kernel:<6} {T:>5} {C:>3} {S:>3}"
            for n in names:
                row += f" {times[n] * 1e3:>14.3f}"
            if len(names) == 2:
                row += f" {times['python'] / times['cython']:>8.1f}x"
            print(row)


if __name__ == "__main__":
    main()
