"""Benchmark the hot kernels: JIT-compiled versus pure-Python fallback.

Both paths run the same source on the same inputs and produce identical
results; this script measures the speed gap.  Run directly:

    python benchmarks/bench_kernels.py [--quick]

With INLIQ_NO_NUMBA=1 only the fallback is timed (the JIT column is
reported as unavailable).
"""

import argparse
import time

import numpy as np

from inliq import _kernels


def time_call(fn, make_args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        args = make_args()
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_dissect(n):
    rng = np.random.default_rng(0)
    prices = 1.0 + np.cumsum(2e-4 * rng.standard_normal(n))
    times = np.arange(n, dtype=np.int64)
    outs = (np.empty(n, dtype=np.int8), np.empty(n, dtype=np.int64),
            np.empty(n, dtype=np.float64), np.empty(n, dtype=np.float64),
            np.empty(n, dtype=np.int64))

    def make():
        return (times, prices, 0.001, 1, prices[0], 0, 0.0, 0, False, *outs)

    return "dissect_chunk", n, make


def bench_chain(n):
    from inliq import ThresholdLadder, analytic_matrix
    m = analytic_matrix(ThresholdLadder.doubling(0.00025, 12))
    succ0 = np.ascontiguousarray(m.succ[:, 0])
    succ1 = np.ascontiguousarray(np.where(m.succ[:, 1] >= 0, m.succ[:, 1], 0))
    p0 = np.ascontiguousarray(m.probs[:, 0])
    u = np.random.default_rng(1).random(n)
    out = np.empty(n)

    def make():
        return (succ0, succ1, p0, 0, u, out)

    return "chain_surprise_chunk", n, make


def bench_passage(n_paths, n_steps):
    rng = np.random.default_rng(2)
    normals = rng.standard_normal((n_paths, n_steps))
    u_up = rng.random((n_paths, n_steps))
    u_dn = rng.random((n_paths, n_steps))

    def make():
        # fresh path state: absorbed paths are skipped, so reuse would
        # time an empty pass
        return (np.zeros(n_paths), np.zeros(n_paths),
                np.zeros(n_paths, dtype=np.int8), normals, u_up, u_dn,
                0.0, 0.05, 5.0, 1.0, 1.0 / 0.05 ** 2, True)

    return "first_passage_chunk", n_paths * n_steps, make


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    opts = parser.parse_args()
    scale = 10 if opts.quick else 1

    cases = [
        bench_dissect(20_000_000 // scale),
        bench_chain(10_000_000 // scale),
        bench_passage(2_000 // scale + 1, 2_000),
    ]
    funcs = _kernels.kernel_functions()

    print(f"backend: {_kernels.BACKEND}")
    header = f"{'kernel':26s} {'ops':>12s} {'jit':>10s} {'python':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for name, ops, make_args in cases:
        jit_fn, pure_fn = funcs[name]
        if _kernels.HAVE_NUMBA:
            jit_fn(*make_args())  # compile before timing
            t_jit = time_call(jit_fn, make_args)
            jit_col = f"{ops / t_jit / 1e6:7.0f}M/s"
        else:
            t_jit = None
            jit_col = "      n/a"
        t_py = time_call(pure_fn, make_args, repeat=1)
        speedup = f"{t_py / t_jit:7.0f}x" if t_jit else "     n/a"
        print(f"{name:26s} {ops:12,d} {jit_col:>10s} "
              f"{ops / t_py / 1e6:7.0f}M/s {speedup:>8s}")


if __name__ == "__main__":
    main()
