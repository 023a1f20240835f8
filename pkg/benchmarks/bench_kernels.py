#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Run twice to compare paths:

    python benchmarks/bench_kernels.py                     # numba (default)
    QTHERMO_PURE_NUMPY=1 python benchmarks/bench_kernels.py

Reports per-kernel wall times on transfer-operator-sized workloads.
"""

import time

import numpy as np

from qthermo import kernels


def timeit(fn, *args, repeat=20):
    fn(*args)  # warm-up (numba compilation)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def main():
    rng = np.random.default_rng(0)
    n = 4096
    path = "pure-numpy" if kernels.PURE_NUMPY else "numba"
    print(f"kernel path: {path}")

    vals = 1.0 + rng.random(n)
    pts = rng.random(8 * n)
    print(f"lininterp      ({8*n} pts):   {timeit(kernels.lininterp, vals, pts, True)*1e3:8.3f} ms")

    x = rng.random(8 * n)
    print(f"mp_left_inverse({8*n} pts):   {timeit(kernels.mp_left_inverse, x, 0.5)*1e3:8.3f} ms")

    pre = rng.random((2, n))
    w = np.exp(0.05 * rng.random((2, n)))
    g = 1.0 + rng.random(n)
    rho = rng.random(n)
    print(f"transfer_apply (deg 2, N={n}): {timeit(kernels.transfer_apply, g, pre, w, True)*1e3:8.3f} ms")
    print(f"adjoint_apply  (deg 2, N={n}): {timeit(kernels.adjoint_apply, rho, pre, w, True)*1e3:8.3f} ms")

    m = 4096
    orbits = rng.random((m, 13))
    order = np.argsort(rng.random(m))
    print(f"greedy_separated({m} cands):  {timeit(kernels.greedy_separated, orbits, order, 0.05, True, repeat=3)*1e3:8.3f} ms")


if __name__ == "__main__":
    main()
