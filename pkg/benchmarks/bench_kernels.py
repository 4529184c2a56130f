"""Compare the compiled and numpy backends of the weighted reductions.

Run with ``python3 benchmarks/bench_kernels.py [--n 32 64] [--repeat 5]``.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from nslab import kernels
from nslab.grid import GridSpec


def bench(n: int, repeat: int) -> list[tuple[str, str, float, float]]:
    g = GridSpec(3, n)
    f = np.random.default_rng(0).random(g.shape)
    center = (0.1, -0.2, 0.3)
    cases = {
        "weighted_sum mu=0": lambda: kernels.weighted_sum(g, f, center, 0.0, -1.0),
        "weighted_sum mu=1e-2": lambda: kernels.weighted_sum(g, f, center, 1e-2, -1.0),
        "ball_sum r=4h": lambda: kernels.ball_sum(g, f, center, 4 * g.h),
    }
    rows = []
    for backend in kernels.available_backends():
        kernels.use_backend(backend)
        for name, fn in cases.items():
            t = min(timeit.repeat(fn, number=3, repeat=repeat)) / 3
            rows.append((backend, name, t, fn()))
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[32, 64])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    start = kernels.BACKEND
    try:
        for n in args.n:
            rows = bench(n, args.repeat)
            base = {name: t for b, name, t, _ in rows if b == "python"}
            ref = {name: v for b, name, _, v in rows if b == "python"}
            print(f"N = {n}")
            for b, name, t, v in rows:
                rel = abs(v - ref[name]) / max(abs(ref[name]), 1e-300)
                print(f"  {b:7s} {name:22s} {1e3 * t:9.3f} ms  speedup {base[name] / t:6.2f}x  rel.diff {rel:.1e}")
    finally:
        kernels.use_backend(start)


if __name__ == "__main__":
    main()
