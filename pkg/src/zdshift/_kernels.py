"""Hot inner loops, compiled with numba when available.

Every kernel has a pure-numpy twin with the same signature. Setting
``ZDSHIFT_NO_NUMBA=1`` in the environment (or a missing numba install)
binds the public names to the numpy versions. Both are always importable
as ``numpy_impl.<name>`` / ``numba_impl.<name>`` for cross-checks and
benchmarks.
"""
from __future__ import annotations

import os
import types

import numpy as np

_DISABLED = os.environ.get("ZDSHIFT_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:  # pragma: no cover - depends on the environment
    import numba

    NUMBA_AVAILABLE = True
except Exception:  # pragma: no cover
    numba = None
    NUMBA_AVAILABLE = False


# ---------------------------------------------------------------------------
# numpy versions
# ---------------------------------------------------------------------------

def _match_mask_np(big, small):
    """Boolean array over placements: True where ``small`` equals the window of ``big``."""
    out_shape = tuple(b - s + 1 for b, s in zip(big.shape, small.shape))
    if any(s <= 0 for s in out_shape):
        return np.zeros(tuple(max(s, 0) for s in out_shape), dtype=np.bool_)
    mask = np.ones(out_shape, dtype=np.bool_)
    for j in np.ndindex(*small.shape):
        window = tuple(slice(o, o + s) for o, s in zip(j, out_shape))
        mask &= big[window] == small[j]
    return mask


def _symbol_residue_counts_np(symbols, residues, n_symbols, n_residues):
    """counts[c, r] over flat arrays; cells with residue < 0 are ignored."""
    keep = residues >= 0
    flat = symbols[keep].astype(np.int64) * n_residues + residues[keep]
    return np.bincount(flat, minlength=n_symbols * n_residues).reshape(n_symbols, n_residues)


def _count_words_in_bounds_np(n_cells, c, residues, n_residues, lo, hi, chunk=1 << 16):
    """Number of words in [0,c)^n_cells whose per-(symbol, residue) counts all lie in [lo, hi].

    Cells with residue < 0 are free (not counted).
    """
    total = c ** n_cells
    powers = c ** np.arange(n_cells, dtype=np.int64)
    onehot = np.zeros((n_cells, n_residues), dtype=np.int64)
    for j, r in enumerate(residues):
        if r >= 0:
            onehot[j, r] = 1
    good = 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = (idx[:, None] // powers[None, :]) % c
        ok = np.ones(idx.shape[0], dtype=np.bool_)
        for sym in range(c):
            cnt = (digits == sym).astype(np.int64) @ onehot
            ok &= np.all((cnt >= lo) & (cnt <= hi), axis=1)
        good += int(ok.sum())
    return good


def _points_in_mask_np(points, mask, placements):
    """For each placement g: number of points p with mask[p - g] True (inside the mask box)."""
    out = np.zeros(placements.shape[0], dtype=np.int64)
    if points.shape[0] == 0:
        return out
    shape = np.asarray(mask.shape, dtype=np.int64)
    for i in range(placements.shape[0]):
        rel = points - placements[i]
        inside = np.all((rel >= 0) & (rel < shape), axis=1)
        if inside.any():
            out[i] = int(mask[tuple(rel[inside].T)].sum())
    return out


numpy_impl = types.SimpleNamespace(
    match_mask=_match_mask_np,
    symbol_residue_counts=_symbol_residue_counts_np,
    count_words_in_bounds=_count_words_in_bounds_np,
    points_in_mask=_points_in_mask_np,
)


# ---------------------------------------------------------------------------
# numba versions
# ---------------------------------------------------------------------------

if NUMBA_AVAILABLE:

    @numba.njit(cache=True, nogil=True)
    def _match_flat_nb(big, strides, out_shape, offsets, small):
        d = out_shape.shape[0]
        n_pos = 1
        for a in range(d):
            n_pos *= out_shape[a]
        n_cells = offsets.shape[0]
        out = np.zeros(n_pos, dtype=np.bool_)
        idx = np.zeros(d, dtype=np.int64)
        base = 0
        for p in range(n_pos):
            ok = True
            for j in range(n_cells):
                if big[base + offsets[j]] != small[j]:
                    ok = False
                    break
            out[p] = ok
            # advance the placement odometer, last axis fastest
            a = d - 1
            while a >= 0:
                idx[a] += 1
                base += strides[a]
                if idx[a] < out_shape[a]:
                    break
                base -= strides[a] * idx[a]
                idx[a] = 0
                a -= 1
        return out

    # below this many pattern cells the vectorized slice compare is faster than early exit
    MATCH_JIT_MIN_CELLS = 96

    def _match_mask_nb(big, small):
        out_shape = tuple(b - s + 1 for b, s in zip(big.shape, small.shape))
        if any(s <= 0 for s in out_shape):
            return np.zeros(tuple(max(s, 0) for s in out_shape), dtype=np.bool_)
        if small.size < MATCH_JIT_MIN_CELLS:
            return _match_mask_np(big, small)
        big_c = np.ascontiguousarray(big)
        strides = np.array(big_c.strides, dtype=np.int64) // big_c.itemsize
        # flat offset of each pattern cell relative to the placement corner
        offsets = np.zeros(small.shape, dtype=np.int64)
        for axis in range(big.ndim):
            view = [1] * big.ndim
            view[axis] = -1
            offsets = offsets + (np.arange(small.shape[axis], dtype=np.int64) * strides[axis]).reshape(view)
        flat = _match_flat_nb(
            big_c.ravel(),
            strides,
            np.array(out_shape, dtype=np.int64),
            offsets.ravel(),
            np.ascontiguousarray(small, dtype=big_c.dtype).ravel(),
        )
        return flat.reshape(out_shape)

    @numba.njit(cache=True, nogil=True)
    def _symbol_residue_counts_nb(symbols, residues, n_symbols, n_residues):
        counts = np.zeros((n_symbols, n_residues), dtype=np.int64)
        for i in range(symbols.shape[0]):
            r = residues[i]
            if r >= 0:
                counts[symbols[i], r] += 1
        return counts

    @numba.njit(cache=True, nogil=True)
    def _count_words_in_bounds_nb(n_cells, c, residues, n_residues, lo, hi):
        digits = np.zeros(n_cells, dtype=np.int64)
        counts = np.zeros((c, n_residues), dtype=np.int64)
        for j in range(n_cells):
            if residues[j] >= 0:
                counts[0, residues[j]] += 1
        total = 1
        for _ in range(n_cells):
            total *= c
        good = 0
        for _w in range(total):
            ok = True
            for s in range(c):
                for r in range(n_residues):
                    v = counts[s, r]
                    if v < lo or v > hi:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                good += 1
            # odometer increment, cell 0 fastest
            j = 0
            while j < n_cells:
                old = digits[j]
                new = old + 1
                r = residues[j]
                if new == c:
                    digits[j] = 0
                    if r >= 0:
                        counts[old, r] -= 1
                        counts[0, r] += 1
                    j += 1
                else:
                    digits[j] = new
                    if r >= 0:
                        counts[old, r] -= 1
                        counts[new, r] += 1
                    break
        return good

    @numba.njit(cache=True, nogil=True)
    def _points_in_mask_flat_nb(points, mask_flat, shape, strides, placements):
        n_place = placements.shape[0]
        d = points.shape[1]
        out = np.zeros(n_place, dtype=np.int64)
        for i in range(n_place):
            cnt = 0
            for p in range(points.shape[0]):
                idx = 0
                inside = True
                for a in range(d):
                    x = points[p, a] - placements[i, a]
                    if x < 0 or x >= shape[a]:
                        inside = False
                        break
                    idx += x * strides[a]
                if inside and mask_flat[idx]:
                    cnt += 1
            out[i] = cnt
        return out

    def _points_in_mask_nb(points, mask, placements):
        m = np.ascontiguousarray(mask, dtype=np.bool_)
        strides = np.array(m.strides, dtype=np.int64) // m.itemsize
        return _points_in_mask_flat_nb(
            np.ascontiguousarray(points, dtype=np.int64),
            m.ravel(),
            np.array(m.shape, dtype=np.int64),
            strides,
            np.ascontiguousarray(placements, dtype=np.int64),
        )

    numba_impl = types.SimpleNamespace(
        match_mask=_match_mask_nb,
        symbol_residue_counts=_symbol_residue_counts_nb,
        count_words_in_bounds=_count_words_in_bounds_nb,
        points_in_mask=_points_in_mask_nb,
    )
else:  # pragma: no cover
    numba_impl = None


USING_NUMBA = NUMBA_AVAILABLE and not _DISABLED
BACKEND = "numba" if USING_NUMBA else "numpy"
_active = numba_impl if USING_NUMBA else numpy_impl


def match_mask(big: np.ndarray, small: np.ndarray) -> np.ndarray:
    return _active.match_mask(big, small)


def symbol_residue_counts(symbols: np.ndarray, residues: np.ndarray, n_symbols: int, n_residues: int) -> np.ndarray:
    return _active.symbol_residue_counts(
        np.ascontiguousarray(symbols, dtype=np.int64).ravel(),
        np.ascontiguousarray(residues, dtype=np.int64).ravel(),
        int(n_symbols),
        int(n_residues),
    )


def count_words_in_bounds(n_cells: int, c: int, residues: np.ndarray, n_residues: int, lo: int, hi: int) -> int:
    return int(
        _active.count_words_in_bounds(
            int(n_cells), int(c), np.ascontiguousarray(residues, dtype=np.int64), int(n_residues), int(lo), int(hi)
        )
    )


def points_in_mask(points: np.ndarray, mask: np.ndarray, placements: np.ndarray) -> np.ndarray:
    return _active.points_in_mask(
        np.asarray(points, dtype=np.int64).reshape(-1, mask.ndim),
        mask,
        np.asarray(placements, dtype=np.int64).reshape(-1, mask.ndim),
    )
