"""Time the pure-Python and compiled DP kernels on random cost matrices.

    python3 benchmarks/bench_kernels.py [--sizes 16 64 256] [--repeat 3]
"""

import argparse
import time

import numpy as np

from storyalign.align import _backend


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 64, 256])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    impls = [("python", _backend.pure)]
    if _backend.compiled is not None:
        impls.append(("cython", _backend.compiled))
    else:
        print("compiled extension not built; timing the fallback only")

    print(f"{'kernel':<14} {'size':>6} " + " ".join(f"{name:>12}" for name, _ in impls) + f" {'speedup':>9}")
    for n in args.sizes:
        cost = np.ascontiguousarray(rng.uniform(0, 2, size=(n, n)))
        for kernel in ("dtw_fill", "drop_dtw_fill"):
            call = (lambda mod: lambda: mod.dtw_fill(cost)) if kernel == "dtw_fill" else (
                lambda mod: lambda: mod.drop_dtw_fill(cost, 0.8, 0.8)
            )
            times = [best_time(call(mod), args.repeat) for _, mod in impls]
            speed = f"{times[0] / times[1]:8.1f}x" if len(times) > 1 else ""
            print(f"{kernel:<14} {n:>6} " + " ".join(f"{t * 1e3:10.2f}ms" for t in times) + f" {speed:>9}")


if __name__ == "__main__":
    main()
