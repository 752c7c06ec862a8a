"""Compare the compiled and NumPy kernel backends.

Run with ``python3 benchmarks/bench_kernels.py``. Prints the median wall
time of each kernel per backend and the speedup, and checks that both
backends agree.
"""
import argparse
import statistics
import time
from math import comb

import numpy as np

from cra import _kernels_py

try:
    from cra import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def _median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def cases(rng):
    X = rng.standard_normal((40, 60))
    X /= np.linalg.norm(X, axis=0)
    G = X.T @ X
    b = rng.standard_normal(100_000)
    subsets = np.sort(np.argsort(rng.random((20_000, 60)), axis=1)[:, :4], axis=1)
    return {
        "project_l1_ball (p=1e5)": lambda m: m.project_l1_ball(b, 50.0),
        f"rip_range k=3 (C(60,3)={comb(60, 3)})": lambda m: m.rip_range(G, 3, 0, comb(60, 3)),
        "rip_subsets k=4 (2e4 subsets)": lambda m: m.rip_subsets(G, subsets),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    if _kernels_c is None:
        print("compiled backend unavailable; only the NumPy backend is timed")
    print(f"{'kernel':40s} {'numpy [s]':>10s} {'cython [s]':>11s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        t_py = _median_time(lambda: fn(_kernels_py), args.repeats)
        if _kernels_c is None:
            print(f"{name:40s} {t_py:10.4f}")
            continue
        t_c = _median_time(lambda: fn(_kernels_c), args.repeats)
        a, c = np.asarray(fn(_kernels_py)), np.asarray(fn(_kernels_c))
        agree = np.allclose(a, c, rtol=1e-10, atol=1e-12)
        print(f"{name:40s} {t_py:10.4f} {t_c:11.4f} {t_py / t_c:7.1f}x"
              + ("" if agree else "  MISMATCH"))


if __name__ == "__main__":
    main()
