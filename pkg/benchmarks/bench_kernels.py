"""Compare the numba kernels with their numpy twins.

Run with ``python3 benchmarks/bench_kernels.py``; prints the best of several
repeats per kernel and backend, after one warm-up call that triggers compilation.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from zdshift import _kernels
from zdshift.lattice import residue_grid


def _best(fn, repeats: int) -> float:
    fn()  # warm-up (jit compile / caches)
    best = float("inf")
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def cases(rng: np.random.Generator):
    big1 = rng.integers(0, 2, size=200_000).astype(np.uint8)
    small1 = rng.integers(0, 2, size=12).astype(np.uint8)
    wide1 = rng.integers(0, 2, size=512).astype(np.uint8)
    big2 = rng.integers(0, 2, size=(400, 400)).astype(np.uint8)
    small2 = rng.integers(0, 2, size=(3, 3)).astype(np.uint8)
    word = rng.integers(0, 40, size=24_000)
    res = residue_grid((24_000,), 2).ravel()
    lln_res = residue_grid((20,), 1).ravel()
    pts = rng.integers(0, 2000, size=(500, 1))
    mask = np.ones(256, dtype=np.bool_)
    placements = np.arange(0, 2000, 4).reshape(-1, 1)
    return {
        "match_mask 1-D (200k, 12)": lambda k: k.match_mask(big1, small1),
        "match_mask 1-D (200k, 512)": lambda k: k.match_mask(big1, wide1),
        "match_mask 2-D (400^2, 3^2)": lambda k: k.match_mask(big2, small2),
        "symbol_residue_counts (24k, 40x2)": lambda k: k.symbol_residue_counts(word, res, 40, 2),
        "count_words_in_bounds (2^20 words)": lambda k: k.count_words_in_bounds(20, 2, lln_res, 1, 9, 11),
        "points_in_mask (500 pts, 500 placements)": lambda k: k.points_in_mask(pts, mask, placements),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels.numba_impl is None:
        print("numba is not installed; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':44s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speed-up':>9s}")
    for name, call in cases(rng).items():
        a = call(_kernels.numpy_impl)
        b = call(_kernels.numba_impl)
        if not np.array_equal(np.asarray(a), np.asarray(b)):
            raise SystemExit(f"{name}: backends disagree")
        t_np = _best(lambda: call(_kernels.numpy_impl), args.repeats)
        t_nb = _best(lambda: call(_kernels.numba_impl), args.repeats)
        print(f"{name:44s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
