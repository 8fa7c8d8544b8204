"""Benchmark the two kernel backends against each other.

Runs best_split_scan and mdl_boundary_scan over sorted synthetic feature
columns of growing size and prints a per-size timing table.  The numba
backend is JIT-warmed before timing so compilation cost is excluded.

Usage: python3 benchmarks/bench_kernels.py [--sizes 1000,10000,...] [--repeats N]
"""

import argparse
from time import perf_counter

import numpy as np

from opmal.kernels import numpy_backend

try:
    from opmal.kernels import numba_backend
except ImportError:
    numba_backend = None


def make_column(n, rng):
    """Sorted float64 counts with duplicates plus mixed 0/1 labels."""
    values = np.sort(rng.integers(0, max(8, n // 50), size=n).astype(np.float64))
    labels = (rng.random(n) < 0.4).astype(np.int64)
    return values, labels


def best_of(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = perf_counter()
        fn(*args)
        best = min(best, perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1000,10000,100000,1000000",
                    help="comma-separated column lengths")
    ap.add_argument("--repeats", type=int, default=5, help="timed runs per cell (best wins)")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(0)

    backends = [("numpy", numpy_backend)]
    if numba_backend is not None:
        warm_v, warm_y = make_column(256, rng)
        numba_backend.best_split_scan(warm_v, warm_y, 1)
        numba_backend.mdl_boundary_scan(warm_v, warm_y)
        backends.append(("numba", numba_backend))
    else:
        print("numba unavailable; timing the numpy backend only\n")

    for kernel in ("best_split_scan", "mdl_boundary_scan"):
        print(f"{kernel}:")
        header = f"  {'n':>9}" + "".join(f"  {name:>12}" for name, _ in backends)
        if len(backends) == 2:
            header += f"  {'speedup':>8}"
        print(header)
        for n in sizes:
            values, labels = make_column(n, rng)
            cells = []
            for _, mod in backends:
                fn = getattr(mod, kernel)
                call_args = (values, labels, 1) if kernel == "best_split_scan" else (values, labels)
                cells.append(best_of(fn, call_args, args.repeats))
            row = f"  {n:>9,}" + "".join(f"  {c * 1e3:>10.3f}ms" for c in cells)
            if len(cells) == 2:
                row += f"  {cells[0] / cells[1]:>7.1f}x"
            print(row)
        print()


if __name__ == "__main__":
    main()
