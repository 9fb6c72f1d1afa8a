#!/usr/bin/env python3
"""Benchmark the jitted kernels against their pure-numpy fallbacks.

Runs each hot kernel on a representative workload under both
implementations (JIT warmup excluded from timing) and prints a table.

    python benchmarks/bench_kernels.py [--repeats 5] [--scale 1.0]
"""

import argparse
import time

import numpy as np

from softpu import kernels


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_linear(scale):
    rng = np.random.default_rng(0)
    n, d, epochs = int(50_000 * scale), 8, 10
    X = rng.standard_normal((n, d))
    s = rng.random(n)
    order = np.stack([rng.permutation(n) for _ in range(epochs)]).astype(np.int64)

    def run(impl):
        impl(np.zeros(d + 1), X, s, order, 256, 0.3, 0.0)

    return "linear epochs (50k x 8, 10 ep)", run


def bench_mlp(scale):
    rng = np.random.default_rng(1)
    n, d, h, epochs = int(20_000 * scale), 8, 16, 5
    X = rng.standard_normal((n, d))
    s = rng.random(n)
    order = np.stack([rng.permutation(n) for _ in range(epochs)]).astype(np.int64)
    n_params = d * h + 2 * h + 1

    def run(impl):
        impl(0.1 * np.ones(n_params), X, s, order, 256, 0.3, 0.0, h)

    return "mlp epochs (20k x 8, h=16, 5 ep)", run


def bench_eg(scale):
    rng = np.random.default_rng(2)
    n, m = int(2_000 * scale), 101
    grid = np.linspace(1e-4, 1 - 1e-4, m)
    ks = rng.binomial(20, 0.5, n)
    B = grid[None, :] ** ks[:, None] * (1 - grid[None, :]) ** (20 - ks)[:, None]
    f0 = np.full(m, 1.0 / m)

    def run(impl):
        impl(B, f0.copy(), float(grid[1] - grid[0]), 1e-3, 0.5, 300, 1e-12)

    return "prior fit EG (2k records, 300 it)", run


def bench_enumeration(scale):
    rng = np.random.default_rng(3)
    m = 18 if scale >= 1.0 else 14
    pos = rng.random(m)
    pos /= pos.sum()
    neg = rng.random(m)
    neg /= neg.sum()

    def run(impl):
        impl(pos, neg)

    return f"classifier enumeration (2^{m})", run


BENCHES = {
    "linear_epochs": bench_linear,
    "mlp_epochs": bench_mlp,
    "eg_minimize": bench_eg,
    "enumerate_confusions": bench_enumeration,
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--scale", type=float, default=1.0)
    args = parser.parse_args()

    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba unavailable: nothing to compare")

    print(f"{'kernel':38s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for name, make in BENCHES.items():
        label, run = make(args.scale)
        numba_impl = getattr(kernels, f"{name}_numba")
        numpy_impl = getattr(kernels, f"{name}_numpy")
        run(numba_impl)  # JIT warmup
        t_nb = timeit(lambda: run(numba_impl), args.repeats)
        t_np = timeit(lambda: run(numpy_impl), args.repeats)
        print(f"{label:38s} {t_nb * 1e3:9.1f}ms {t_np * 1e3:9.1f}ms {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
