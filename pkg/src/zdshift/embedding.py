"""Prescribing values on a sparse set inside a stage pattern.

``embed`` writes an assignment ``a`` on P cap (A_k + g0) into a member-like word of
level k by recursing through the block hierarchy: cells on the inserted
hyperplanes are set directly, blocks without constraints are left alone, and
constrained blocks are edited one level down. Every edited block must pass the
admissibility predicate at full width, so the result is an admissible word
even when it is not one of the stored members.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .construction import Stage, block_corner, check_member, cut_index, decompose
from .lattice import Box, Vector, as_vector, residue_index, Sublattice
from .patterns import Pattern
from .sparse import SparseSet


class EmbeddingError(RuntimeError):
    pass


class DensityCertificateError(EmbeddingError):
    """Too many blocks of one word need changes, or no admissible repair exists."""

    def __init__(self, level: int, touched: int, budget: int, detail: str = ""):
        self.level, self.touched, self.budget = level, touched, budget
        msg = f"level {level}: {touched} touched blocks, budget {budget}"
        super().__init__(msg + (f" ({detail})" if detail else ""))


class PreserveStraddlesError(EmbeddingError):
    pass


class AssignmentError(ValueError):
    pass


# ---------------------------------------------------------------------------
# skeleton
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Skeleton:
    k: int
    mask: np.ndarray

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    def positions(self) -> list[Vector]:
        return [tuple(int(x) for x in p) for p in np.argwhere(self.mask)]

    def free_cells(self) -> list[Vector]:
        return [tuple(int(x) for x in p) for p in np.argwhere(~self.mask)]


def tilde_region(stages: Sequence[Stage], k: int) -> Skeleton:
    """A~_1 = {0}; A~_{j+1} = union over g in [0, L)^d of A~_j + n_j g + Delta(n_j g)."""
    if not 1 <= k <= len(stages):
        raise ValueError(f"k={k} outside the built range 1..{len(stages)}")
    d = stages[0].d
    mask = np.ones((1,) * d, dtype=np.bool_)
    for j in range(1, k):
        prev, stage = stages[j - 1], stages[j]
        L = stage.blocks_per_side
        nxt = np.zeros((stage.n,) * d, dtype=np.bool_)
        for g in np.ndindex(*(L,) * d):
            c = block_corner(g, prev.n, L)
            nxt[tuple(slice(x, x + prev.n) for x in c)] |= mask
        mask = nxt
    return Skeleton(k, mask)


# ---------------------------------------------------------------------------
# assignments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Assignment:
    g0: Vector
    values: dict

    def __post_init__(self):
        vals = {}
        for h, v in self.values.items():
            h = as_vector(h, len(self.g0))
            if v not in (0, 1):
                raise AssignmentError(f"value {v!r} at {h} is not binary")
            vals[h] = int(v)
        object.__setattr__(self, "g0", as_vector(self.g0))
        object.__setattr__(self, "values", vals)

    @property
    def domain(self) -> frozenset:
        return frozenset(self.values)

    @classmethod
    def constant(cls, P: SparseSet, box: Box, value: int) -> "Assignment":
        return cls(box.corner, {tuple(int(x) for x in p): value for p in P.within(box)})

    def to_text(self) -> str:
        return "".join(" ".join(str(x) for x in h) + f" {v}\n" for h, v in sorted(self.values.items()))


def parse_assignment(text: str, g0: Sequence[int]) -> Assignment:
    vals = {}
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        nums = [int(x) for x in ln.split()]
        if len(nums) != len(g0) + 1:
            raise AssignmentError(f"line {ln!r} needs {len(g0)} coordinates and a value")
        h = tuple(nums[:-1])
        if h in vals:
            raise AssignmentError(f"point {h} assigned twice")
        vals[h] = nums[-1]
    return Assignment(tuple(g0), vals)


def _check_domain(a: Assignment, P: SparseSet, box: Box):
    want = frozenset(tuple(int(x) for x in p) for p in P.within(box))
    if a.domain != want:
        extra = sorted(a.domain - want)[:3]
        missing = sorted(want - a.domain)[:3]
        raise AssignmentError(f"assignment domain differs from P cap (A_k+g0): extra {extra}, missing {missing}")


# ---------------------------------------------------------------------------
# recursive embedding
# ---------------------------------------------------------------------------

def perturbation_budget(stage: Stage) -> int:
    """floor((1 - sigma) * d_{k-1} * L^d): blocks of one level-k word that may change."""
    p = stage.last_params
    return math.floor((1 - p.slack) * p.d_tol * p.blocks_per_side ** stage.d)


def _split(h: Vector, n_b: int, L: int, cut: int):
    """Block index and offset of a local cell, or None for cells on the inserted hyperplanes."""
    if any(x == cut for x in h):
        return None
    g = tuple(x // n_b if x < cut else (x - 1) // n_b for x in h)
    off = tuple(x - c for x, c in zip(h, block_corner(g, n_b, L)))
    return g, off


@dataclass
class EmbedStats:
    touched: dict = field(default_factory=dict)  # level -> max touched blocks seen
    fallbacks: int = 0

    def note(self, level: int, touched: int):
        self.touched[level] = max(self.touched.get(level, 0), touched)


class _Embedder:
    def __init__(self, stages: Sequence[Stage]):
        self.stages = stages
        self.stats = EmbedStats()

    def ok(self, level: int, arr: np.ndarray) -> bool:
        if level == 1:
            return True
        if self.stages[level - 1].block_index.index_of(arr) >= 0:
            return True
        return bool(check_member(self.stages, level, arr, Fraction(1)))

    def block(self, level: int, cur: np.ndarray, cons: dict, frozen: Box | None, balance=None) -> np.ndarray:
        """An admissible level-``level`` word satisfying ``cons``, changing ``cur`` as little as possible."""
        first_err = None
        try:
            new = self.edit(level, cur, cons, frozen)
            if self.ok(level, new):
                return new
            first_err = DensityCertificateError(level, -1, -1, "edited word fails the full-width predicate")
        except DensityCertificateError as exc:
            first_err = exc
        if frozen is not None or level == 1:
            raise first_err
        # alternative starting points among the stored members
        self.stats.fallbacks += 1
        members = self.stages[level - 1].patterns.array
        flat_keys = list(cons.items())
        mism = []
        for i in range(members.shape[0]):
            bad = sum(1 for h, v in flat_keys if members[i][h] != v)
            mism.append((bad, balance(i) if balance else 0, i))
        for bad, _, i in sorted(mism):
            start = np.asarray(members[i])
            if bad == 0:
                return start.copy()
            try:
                new = self.edit(level, start, cons, None)
            except DensityCertificateError:
                continue
            if self.ok(level, new):
                return new
        raise first_err

    def edit(self, level: int, cur: np.ndarray, cons: dict, frozen: Box | None) -> np.ndarray:
        out = np.array(cur, dtype=np.uint8, copy=True)
        pending = {h: v for h, v in cons.items() if out[h] != v}
        if not pending:
            return out
        if level == 1:
            for h, v in pending.items():
                out[h] = v
            return out
        stage, prev = self.stages[level - 1], self.stages[level - 2]
        L = stage.blocks_per_side
        n_b = prev.n
        cut = cut_index(n_b, L)
        groups: dict = {}
        for h, v in cons.items():
            s = _split(h, n_b, L, cut)
            if s is None:
                out[h] = v
                continue
            g, off = s
            groups.setdefault(g, {})[off] = v
        # free cells of a lower block never change its symbol: write them directly
        skel = prev.skeleton
        touched = []
        for g, gc in groups.items():
            corner = block_corner(g, n_b, L)
            sub = out[tuple(slice(c, c + n_b) for c in corner)]
            for off in [off for off in gc if not skel[off]]:
                sub[off] = gc.pop(off)
            if any(sub[off] != v for off, v in gc.items()):
                touched.append(g)
        budget = perturbation_budget(stage)
        self.stats.note(level, len(touched))
        if len(touched) > budget:
            raise DensityCertificateError(level, len(touched), budget)
        if not touched:
            return out
        word = decompose(out, prev, L)
        K = len(prev.patterns)
        counts = np.zeros((K, prev.m ** stage.d), dtype=np.int64)
        F = Sublattice(stage.d, prev.m)
        inner = word[(slice(0, L - 1),) * stage.d]
        for g in np.argwhere(inner >= 0):
            counts[inner[tuple(g)], residue_index(g, F)] += 1
        for g in sorted(touched):
            corner = block_corner(g, n_b, L)
            sl = tuple(slice(c, c + n_b) for c in corner)
            sub_frozen = None
            if frozen is not None:
                here = Box(corner, (n_b,) * stage.d)
                if here.intersect(frozen).size:
                    if not here.contains(frozen):
                        raise PreserveStraddlesError(f"frozen region {frozen} straddles block {g}")
                    sub_frozen = frozen.translate(tuple(-c for c in corner))
            r = residue_index(g, F)
            in_window = all(x < L - 1 for x in g)
            balance = (lambda i, r=r: int(counts[i, r])) if in_window else None
            new = self.block(level - 1, out[sl], groups[g], sub_frozen, balance)
            if in_window:
                old_sym = word[g]
                new_sym = prev.block_index.index_of(new)
                if old_sym >= 0:
                    counts[old_sym, r] -= 1
                if new_sym >= 0:
                    counts[new_sym, r] += 1
                word[g] = new_sym
            out[sl] = new
        return out


def _template(stage: Stage, template: int | None) -> np.ndarray:
    i = stage.patterns.lexicographic_order()[0] if template is None else int(template)
    return np.asarray(stage.patterns.array[i])


def _local_constraints(a: Assignment, frozen: Box | None = None) -> dict:
    cons = {}
    for h, v in a.values.items():
        loc = tuple(x - g for x, g in zip(h, a.g0))
        if frozen is not None and frozen.contains_point(loc):
            continue
        cons[loc] = v
    return cons


def embed(
    stages: Sequence[Stage],
    k: int,
    a: Assignment,
    P: SparseSet,
    template: int | None = None,
    stats: EmbedStats | None = None,
    start: np.ndarray | None = None,
) -> Pattern:
    """Word on A_k (corner 0) with w(h - g0) = a(h) on P cap (A_k + g0), admissible at full width.

    ``start`` replaces the stored template by another word on A_k (for instance an
    earlier output), so that the result is a minimal edit of it.
    """
    stage = stages[k - 1]
    box = Box.cube(stage.d, stage.n, a.g0)
    _check_domain(a, P, box)
    if start is None:
        base = _template(stage, template)
    else:
        base = np.asarray(start, dtype=np.uint8)
        if base.shape != (stage.n,) * stage.d:
            raise ValueError(f"start word has shape {base.shape}, expected A_{k}")
    emb = _Embedder(stages[:k])
    out = emb.block(k, base, _local_constraints(a), None)
    if stats is not None:
        stats.touched.update(emb.stats.touched)
        stats.fallbacks += emb.stats.fallbacks
    return Pattern(out)


@dataclass(frozen=True)
class ExceptResult:
    pattern: Pattern
    n: int
    frozen: Box
    level: int


def frozen_block(stages: Sequence[Stage], K: int, local: Box) -> tuple[Box, int]:
    """Finest sub-block (local coordinates, and its level) of A_K containing ``local``."""
    d = stages[0].d
    corner = (0,) * d
    level = K
    while level > 1:
        stage, prev = stages[level - 1], stages[level - 2]
        L = stage.blocks_per_side
        cut = cut_index(prev.n, L)
        lo = tuple(x - c for x, c in zip(local.corner, corner))
        hi = tuple(x - c - 1 for x, c in zip(local.upper, corner))
        s_lo, s_hi = _split(lo, prev.n, L, cut), _split(hi, prev.n, L, cut)
        if s_lo is None or s_hi is None or s_lo[0] != s_hi[0]:
            break
        corner = tuple(c + b for c, b in zip(corner, block_corner(s_lo[0], prev.n, L)))
        level -= 1
    return Box(corner, (stages[level - 1].n,) * d), level


def embed_except(
    stages: Sequence[Stage],
    K: int,
    preserve: Box,
    a: Assignment,
    P: SparseSet,
    template: int | None = None,
) -> ExceptResult:
    """Like :func:`embed`, but the finest sub-block containing ``preserve`` keeps the template's values.

    The result agrees with ``a`` on P outside the cube (-n, n)^d reported in ``n``.
    """
    stage = stages[K - 1]
    d = stage.d
    box = Box.cube(d, stage.n, a.g0)
    _check_domain(a, P, box)
    base = _template(stage, template)
    if preserve.is_empty():
        w = embed(stages, K, a, P, template)
        return ExceptResult(w, 0, Box(a.g0, (0,) * d), 0)
    local = preserve.translate(tuple(-g for g in a.g0))
    whole = Box.cube(d, stage.n)
    if local.contains(whole):
        frozen, level = whole, K
    else:
        if not whole.contains(local):
            raise PreserveStraddlesError(f"{preserve} is not inside A_{K} + g0")
        frozen, level = frozen_block(stages, K, local)
        if level == K:
            raise PreserveStraddlesError(f"{preserve} straddles the top-level blocks; shrink or re-center it")
    absolute = frozen.translate(a.g0)
    n = max(max(1 - lo, hi) for lo, hi in zip(absolute.corner, absolute.upper))
    if level == K:
        return ExceptResult(Pattern(base), n, absolute, level)
    emb = _Embedder(stages[:K])
    out = emb.block(K, base, _local_constraints(a, frozen), frozen)
    return ExceptResult(Pattern(out), n, absolute, level)


def central_offset(stages: Sequence[Stage], K: int, level: int) -> Vector:
    """g0 placing the central level-``level`` sub-block of A_K so that it is centered on the origin."""
    d = stages[0].d
    corner = (0,) * d
    for j in range(K, level, -1):
        stage, prev = stages[j - 1], stages[j - 2]
        L = stage.blocks_per_side
        corner = tuple(c + b for c, b in zip(corner, block_corner((L // 2,) * d, prev.n, L)))
    half = stages[level - 1].n // 2
    return tuple(-c - half for c in corner)
