#!/usr/bin/env python3
"""Timing comparison: numba-compiled kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeats 5]

Both backends run on identical inputs; outputs are checked bit-identical
before timing and a warmup call keeps JIT compilation out of the
numbers. With UFOREST_NO_NUMBA=1 (or numba missing) only the numpy side
runs, which is also how to time the fallback the package would use.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from uforest import kernels
from uforest.rng import generator


def _tree_inputs(m: int, d: int, seed: int):
    gen = generator(seed, "bench-tree", m, d)
    X = np.ascontiguousarray(gen.normal(size=(m, d)))
    y = (X[:, 0] + gen.normal(scale=0.8, size=m) > 0.0).astype(np.int64)
    max_nodes = 2 * m + 1
    candidates = np.ascontiguousarray(
        np.tile(np.arange(d, dtype=np.int64), (max_nodes, 1)))
    min_leaf = np.int64(max(1, math.ceil(2.0 * math.sqrt(m))))
    xlogx = kernels.xlogx_table(0)
    return (X, y, np.int64(2), min_leaf, kernels.NO_MAX_DEPTH,
            np.int64(kernels.GINI), candidates, xlogx)


def _points(n: int, d: int, seed: int) -> np.ndarray:
    return np.ascontiguousarray(
        generator(seed, "bench-knn", n, d).normal(size=(n, d)))


def _flatten(out):
    if isinstance(out, tuple):
        return b"".join(np.asarray(part).tobytes() for part in out)
    return np.asarray(out).tobytes()


def _time(fn, args, repeats: int) -> float:
    fn(*args)                      # warmup; compiles on first call
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5,
                    help="timed runs per case, best is kept (default 5)")
    args = ap.parse_args()

    cases = []
    for m, d in ((2000, 5), (8000, 1), (4000, 20)):
        cases.append((f"grow_tree m={m} d={d}", "grow_tree",
                      kernels.grow_tree_numpy, _tree_inputs(m, d, 1)))
    tree_in = _tree_inputs(4000, 5, 2)
    grown = kernels.grow_tree_numpy(*tree_in)
    feature, threshold, left, right = grown[0], grown[1], grown[2], grown[3]
    X_apply = _points(200_000, 5, 3)
    cases.append(("apply_tree m=4000 rows=200000", "apply_tree",
                  kernels.apply_tree_numpy,
                  (feature, threshold, left, right, X_apply)))
    for n, d in ((2000, 3), (4000, 16)):
        pts = _points(n, d, 4)
        cases.append((f"kth_neighbor n={n} d={d}", "kth_neighbor_linf",
                      kernels.kth_neighbor_linf_numpy, (pts, np.int64(3))))
        radii = kernels.kth_neighbor_linf_numpy(pts, np.int64(3))
        cases.append((f"count_within n={n} d={d}", "count_within_linf",
                      kernels.count_within_linf_numpy, (pts, radii)))

    have = bool(kernels.NUMBA_BUILDS)
    if not have:
        print("numba backend unavailable "
              "(UFOREST_NO_NUMBA set or numba missing); timing numpy only")
    header = f"{'case':<34} {'numpy':>10} {'numba':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for label, key, np_fn, inputs in cases:
        t_np = _time(np_fn, inputs, args.repeats)
        if have:
            nb_fn = kernels.NUMBA_BUILDS[key]
            if _flatten(nb_fn(*inputs)) != _flatten(np_fn(*inputs)):
                raise AssertionError(f"backend outputs differ for {label}")
            t_nb = _time(nb_fn, inputs, args.repeats)
            print(f"{label:<34} {t_np * 1e3:8.2f}ms {t_nb * 1e3:8.2f}ms "
                  f"{t_np / t_nb:7.1f}x")
        else:
            print(f"{label:<34} {t_np * 1e3:8.2f}ms {'-':>10} {'-':>8}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
