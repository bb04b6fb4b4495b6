"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--runs 20000]
"""
import argparse
import time

import numpy as np

from mevdisorder import kernels


def _time(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=20_000)
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--mempool", type=int, default=40)
    ap.add_argument("--blocks", type=int, default=4)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    dirs = np.where(rng.random((args.runs, args.blocks, args.mempool)) < 0.5, 1, -1).astype(np.int8)
    pay = np.arange(args.n + 2, dtype=np.int64)
    small = np.where(rng.random(18) < 0.5, 1, -1).astype(np.int8)

    cases = {
        "fcfs batch": lambda m: m.simulate_batch(dirs, args.n, kernels.FCFS, pay),
        "min-oracle batch": lambda m: m.simulate_batch(dirs, args.n, kernels.MIN_ORACLE, pay),
        "bruteforce C(18,6)": lambda m: m.bruteforce_select(small, 6, 0),
    }
    backends = kernels.available_backends()
    print(f"{'case':<22}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases.items():
        times = [_time(lambda: fn(kernels.get_backend(b))) for b in backends]
        speed = f"{times[0] / times[-1]:>9.1f}x" if len(times) > 1 else ""
        print(f"{name:<22}" + "".join(f"{t:>11.4f}s" for t in times) + speed)


if __name__ == "__main__":
    main()
