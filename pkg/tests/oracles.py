"""Slow, obviously-correct reference implementations used only by the tests."""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def naive_occurrences(b1: np.ndarray, c1, b2: np.ndarray, c2, m=None, h=None):
    """All translations g with b2 on (A1 + g) equal to b1, by a cell-by-cell scan."""
    small = b1.tolist() if b1.ndim == 1 else b1.reshape(-1).tolist()
    big = b2
    shape1, shape2 = b1.shape, b2.shape
    cells = list(itertools.product(*(range(s) for s in shape1)))
    out = []
    flat_small = dict(zip(cells, small))
    big_l = big.tolist()

    def at(arr, idx):
        for i in idx:
            arr = arr[i]
        return arr

    for p in itertools.product(*(range(b - s + 1) for b, s in zip(shape2, shape1))):
        ok = True
        for j in cells:
            if at(big_l, [a + b for a, b in zip(p, j)]) != flat_small[j]:
                ok = False
                break
        if not ok:
            continue
        corner = [x + y for x, y in zip(p, c2)]  # corner of the placed copy
        if m is not None and any((x - hh) % m for x, hh in zip(corner, h)):
            continue
        out.append(tuple(x - y for x, y in zip(corner, c1)))
    return sorted(out)


def binomial_window_fraction(n: int, lo: int, hi: int) -> Fraction:
    """Fraction of binary words of length n whose number of ones lies in [lo, hi]."""
    return Fraction(sum(math.comb(n, j) for j in range(max(lo, 0), min(hi, n) + 1)), 2 ** n)


def naive_phi(W: np.ndarray, n_k: int, L: int) -> np.ndarray:
    """Phi(W)(g) = W(g + Delta(g)) evaluated cell by cell."""
    N = W.shape[0] - 1
    cut = L * n_k - n_k
    out = np.zeros((N,) * W.ndim, dtype=W.dtype)
    for g in itertools.product(range(N), repeat=W.ndim):
        out[g] = W[tuple(x + (0 if x < cut else 1) for x in g)]
    return out


def naive_admissible_1d(word, K: int, m: int, d_tol: Fraction, slack: Fraction) -> bool:
    """Direct reading of the coverage and window conditions for d = 1."""
    L = len(word)
    inner = word[: L - 1]
    Q = L - 1
    for c in range(K):
        for r in range(m):
            cnt = sum(1 for g, s in enumerate(inner) if s == c and g % m == r)
            if cnt == 0:
                return False
            f = Fraction(cnt, Q)
            w = d_tol * slack
            if not (1 - w) / (m * K) <= f <= (1 + w) / (m * K):
                return False
    return True


def naive_skeleton(ns, Ls, d):
    """A~_k as a set of cells by applying the union recursion on python sets."""
    cells = {(0,) * d}
    for n, L in zip(ns, Ls):
        cut = L * n - n
        nxt = set()
        for g in itertools.product(range(L), repeat=d):
            shift = tuple(n * x + (0 if n * x < cut else 1) for x in g)
            nxt |= {tuple(a + b for a, b in zip(c, shift)) for c in cells}
        cells = nxt
    return cells
