"""Inductive stage builder and exact stage verifier.

A stage ``C_k`` is a set of binary patterns on ``[0, n_k)^d``. The next stage
is obtained by sampling words over the alphabet ``C_k`` on ``[0, L)^d`` with
``L = l_k * m_{k+1}``, filtering them by residue coverage and frequency
windows modulo ``m_k``, concatenating the blocks and inserting one
hyperplane per axis at index ``L*n_k - n_k`` so that ``n_{k+1} = L*n_k + 1``.
"""
from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _kernels
from .lattice import Box, Sublattice, residue_grid
from .patterns import Pattern, PatternSet, flatten_array, restrict

FORMAT_VERSION = 1


class BuildError(RuntimeError):
    pass


class UnsatisfiableStageError(BuildError):
    """No admissible candidate exists (provably) or none was found in the whole budget."""


class StagePairError(ValueError):
    """Two stages are not consecutive, or the larger one has an inconsistent geometry."""


class FillRule(str, enum.Enum):
    ALL_ZERO = "ALL_ZERO"
    ALL_ONE = "ALL_ONE"
    RANDOM = "RANDOM"
    EXPLICIT = "EXPLICIT"


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class StageParams:
    l: int
    m_next: int
    d_tol: Fraction
    nu: Fraction
    target: int
    budget: int
    seed: int
    slack: Fraction = Fraction(1, 2)
    fill: FillRule = FillRule.ALL_ZERO
    fill_values: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "d_tol", _frac(self.d_tol))
        object.__setattr__(self, "nu", _frac(self.nu))
        object.__setattr__(self, "slack", _frac(self.slack))
        object.__setattr__(self, "fill", FillRule(self.fill))
        if self.l < 1 or self.m_next < 1:
            raise ValueError("l and m_next must be positive")
        if not 0 < self.d_tol <= 1:
            raise ValueError("d_tol must lie in (0, 1]")
        if not 0 <= self.nu < 1:
            raise ValueError("nu must lie in [0, 1)")
        if not 0 < self.slack <= 1:
            raise ValueError("admissibility slack must lie in (0, 1]")
        if self.target < 1 or self.budget < self.target:
            raise ValueError("need target >= 1 and budget >= target")
        if self.fill is FillRule.EXPLICIT and self.fill_values is None:
            raise ValueError("EXPLICIT fill needs fill_values")

    @property
    def blocks_per_side(self) -> int:
        return self.l * self.m_next


@dataclass(frozen=True)
class BuildRecord:
    """Parameters and outcome of one inductive step."""

    params: StageParams
    draws: int
    admissible: int
    accepted: int
    complete: bool

    @property
    def acceptance_ratio(self) -> Fraction:
        return Fraction(self.admissible, self.draws) if self.draws else Fraction(0)


@dataclass(frozen=True)
class Stage:
    k: int
    d: int
    n: int
    m: int
    patterns: PatternSet
    m_schedule: tuple[int, ...]
    history: tuple[BuildRecord, ...] = ()

    def __post_init__(self):
        if math.gcd(self.n, self.m) != 1:
            raise ValueError(f"gcd(n_k={self.n}, m_k={self.m}) != 1")
        if len(self.patterns) == 0:
            raise ValueError("empty stage")
        if self.patterns.support.shape != (self.n,) * self.d:
            raise ValueError("pattern support does not match the stage side")
        if len(self.m_schedule) != self.k or self.m_schedule[-1] != self.m:
            raise ValueError("m schedule inconsistent with stage index")
        if len(self.history) != self.k - 1:
            raise ValueError("history must record one build step per stage after the first")

    @property
    def counts(self) -> tuple[int, ...]:
        return (2,) + tuple(r.accepted for r in self.history)

    @property
    def complete(self) -> bool:
        return all(r.complete for r in self.history)

    @property
    def last_params(self) -> StageParams | None:
        return self.history[-1].params if self.history else None

    @property
    def blocks_per_side(self) -> int:
        """L = l_{k-1} * m_k, the number of lower-stage blocks per axis."""
        if self.k == 1:
            raise ValueError("stage 1 has no block structure")
        return self.history[-1].params.blocks_per_side

    def array(self) -> np.ndarray:
        return np.asarray(self.patterns.array)

    @cached_property
    def skeleton(self) -> np.ndarray:
        """Boolean mask of A~_k: cells covered by concatenated lower blocks (the rest are free)."""
        return skeleton_mask(self.d, [r.params.blocks_per_side for r in self.history])

    @cached_property
    def block_index(self) -> "BlockIndex":
        return BlockIndex(self)

    def __len__(self) -> int:
        return len(self.patterns)


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def init_stage(d: int) -> Stage:
    if d < 1:
        raise ValueError("dimension must be positive")
    pats = PatternSet(np.array([0, 1], dtype=np.uint8).reshape((2,) + (1,) * d))
    return Stage(k=1, d=d, n=1, m=1, patterns=pats, m_schedule=(1,))


# ---------------------------------------------------------------------------
# geometry of the hyperplane insertion
# ---------------------------------------------------------------------------

def cut_index(n_block: int, blocks_per_side: int) -> int:
    """Coordinate of the inserted hyperplanes: L*n_k - n_k."""
    return blocks_per_side * n_block - n_block


def delta(r: int, n_block: int, blocks_per_side: int) -> int:
    return 0 if r < cut_index(n_block, blocks_per_side) else 1


def delta_vector(g: Sequence[int], n_block: int, blocks_per_side: int) -> tuple[int, ...]:
    return tuple(delta(r, n_block, blocks_per_side) for r in g)


def block_corner(g: Sequence[int], n_block: int, blocks_per_side: int) -> tuple[int, ...]:
    """Corner of block g inside a next-stage pattern: n_k*g + Delta(n_k*g)."""
    return tuple(n_block * x + delta(n_block * x, n_block, blocks_per_side) for x in g)


def _phi_array(W: np.ndarray, cut: int) -> np.ndarray:
    out = W
    for axis in range(W.ndim):
        out = np.delete(out, cut, axis=axis)
    return out


def hyperplane_mask(N: int, d: int, cut: int) -> np.ndarray:
    """Cells of [0,N)^d lying on some hyperplane r_i = cut."""
    mask = np.zeros((N,) * d, dtype=np.bool_)
    for axis in range(d):
        idx = [slice(None)] * d
        idx[axis] = cut
        mask[tuple(idx)] = True
    return mask


def skeleton_mask(d: int, blocks_per_side: Sequence[int]) -> np.ndarray:
    """A~_k from the block counts L_1, L_2, ... by tiling and inserting empty hyperplanes."""
    mask = np.ones((1,) * d, dtype=np.bool_)
    n = 1
    for L in blocks_per_side:
        out = np.tile(mask, (L,) * d)
        cut = cut_index(n, L)
        for axis in range(d):
            out = np.insert(out, cut, False, axis=axis)
        mask = out
        n = L * n + 1
    return mask


class BlockIndex:
    """Lookup of stage members by their skeleton cells; free cells never affect identity."""

    def __init__(self, stage: "Stage"):
        self.mask = stage.skeleton.ravel()
        rows = np.asarray(stage.patterns.array).reshape(len(stage.patterns), -1)[:, self.mask]
        self.cells = rows.shape[1]
        self._small = self.cells <= 62
        if self._small:
            keys = self._keys(rows)
            self._order = np.argsort(keys, kind="stable")
            self._sorted = keys[self._order]
            if np.any(self._sorted[1:] == self._sorted[:-1]):
                raise ValueError(f"stage {stage.k} has members that differ only on free cells")
        else:
            self._dict = {}
            for i, r in enumerate(rows):
                key = r.tobytes()
                if key in self._dict:
                    raise ValueError(f"stage {stage.k} has members that differ only on free cells")
                self._dict[key] = i

    def _keys(self, rows: np.ndarray) -> np.ndarray:
        return rows.astype(np.int64) @ (1 << np.arange(rows.shape[1], dtype=np.int64))

    def lookup(self, rows: np.ndarray) -> np.ndarray:
        """Member index of every full row (n^d cells), -1 where none matches."""
        rows = np.ascontiguousarray(rows[:, self.mask], dtype=np.uint8)
        if rows.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        if self._small:
            keys = self._keys(rows)
            pos = np.clip(np.searchsorted(self._sorted, keys), 0, len(self._sorted) - 1)
            return np.where(self._sorted[pos] == keys, self._order[pos], -1)
        return np.array([self._dict.get(r.tobytes(), -1) for r in rows], dtype=np.int64)

    def index_of(self, block: np.ndarray) -> int:
        return int(self.lookup(np.asarray(block, dtype=np.uint8).reshape(1, -1))[0])


def _phi_inverse_array(wt: np.ndarray, cut: int, fill_values: np.ndarray) -> np.ndarray:
    out = wt
    for axis in range(wt.ndim):
        out = np.insert(out, cut, 0, axis=axis)
    out = np.array(out, dtype=np.uint8)
    mask = hyperplane_mask(out.shape[0], wt.ndim, cut)
    out[mask] = fill_values
    return out


def _check_side(side: int, n_block: int, blocks_per_side: int, expected_extra: int):
    want = blocks_per_side * n_block + expected_extra
    if side != want:
        raise ValueError(f"support side {side} != {want} for n_k={n_block}, L={blocks_per_side}")


def phi(W: Pattern, n_block: int, blocks_per_side: int) -> Pattern:
    """Delete the d inserted hyperplanes: Phi(W)(g) = W(g + Delta(g))."""
    if not W.support.is_cube:
        raise ValueError("phi needs a cubic support")
    _check_side(W.support.side, n_block, blocks_per_side, 1)
    return Pattern(_phi_array(W.values, cut_index(n_block, blocks_per_side)), W.corner, W.alphabet)


def n_hyperplane_cells(N: int, d: int) -> int:
    return N ** d - (N - 1) ** d


def _fill_values(rule: FillRule, count: int, rng: np.random.Generator | None, explicit) -> np.ndarray:
    rule = FillRule(rule)
    if rule is FillRule.ALL_ZERO:
        return np.zeros(count, dtype=np.uint8)
    if rule is FillRule.ALL_ONE:
        return np.ones(count, dtype=np.uint8)
    if rule is FillRule.RANDOM:
        if rng is None:
            raise ValueError("RANDOM fill needs a generator")
        return rng.integers(0, 2, size=count).astype(np.uint8)
    vals = np.asarray(explicit, dtype=np.uint8).ravel()
    if vals.shape[0] != count or (vals.size and vals.max() > 1):
        raise ValueError(f"EXPLICIT fill needs exactly {count} binary values")
    return vals


def phi_inverse(
    wt: Pattern,
    n_block: int,
    blocks_per_side: int,
    fill: FillRule | str = FillRule.ALL_ZERO,
    rng: np.random.Generator | None = None,
    fill_values: Sequence[int] | None = None,
) -> Pattern:
    """Select one preimage under phi; hyperplane cells (row-major) come from ``fill``."""
    if not wt.support.is_cube:
        raise ValueError("phi_inverse needs a cubic support")
    _check_side(wt.support.side, n_block, blocks_per_side, 0)
    N = wt.support.side + 1
    vals = _fill_values(fill, n_hyperplane_cells(N, wt.d), rng, fill_values)
    return Pattern(_phi_inverse_array(wt.values, cut_index(n_block, blocks_per_side), vals), wt.corner, wt.alphabet)


# ---------------------------------------------------------------------------
# sampling and admissibility
# ---------------------------------------------------------------------------

def _rng(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def sample_candidate(s: Stage, p: StageParams, draw_index: int) -> Pattern:
    """Uniform word over the alphabet C_k on [0, l_k*m_{k+1})^d, reproducible from (seed, k, draw_index)."""
    L = p.blocks_per_side
    rng = _rng(p.seed, s.k, draw_index)
    word = rng.integers(0, len(s.patterns), size=(L,) * s.d, dtype=np.int64)
    return Pattern(word.astype(np.uint8), (0,) * s.d, alphabet=len(s.patterns))


def window_bounds(Q: int, R: int, K: int, d_tol: Fraction, slack: Fraction = Fraction(1)) -> tuple[int, int]:
    """Integer count bounds for the closed window [(1-d*s)/(R*K), (1+d*s)/(R*K)] on frequencies count/Q."""
    w = _frac(d_tol) * _frac(slack)
    lo = (1 - w) * Q / (R * K)
    hi = (1 + w) * Q / (R * K)
    return math.ceil(lo), math.floor(hi)


def residue_class_sizes(side: int, d: int, m: int) -> np.ndarray:
    """Number of cells of [0, side)^d in each residue class mod m (lexicographic)."""
    per_axis = np.array([len(range(r, side, m)) for r in range(m)], dtype=np.int64)
    out = np.ones(1, dtype=np.int64)
    for _ in range(d):
        out = np.multiply.outer(out, per_axis).ravel()
    return out


def feasibility(s: Stage, p: StageParams) -> Verdict:
    """Necessary conditions for a non-empty admissible set; a failure is a proof of emptiness."""
    K, d, m = len(s.patterns), s.d, s.m
    Q = (p.blocks_per_side - 1) ** d
    R = m ** d
    sizes = residue_class_sizes(p.blocks_per_side - 1, d, m)
    lo, hi = window_bounds(Q, R, K, p.d_tol, p.slack)
    lo = max(lo, 1)
    if hi < lo:
        return Verdict(False, f"(vi) window holds no integer count: need {lo} <= count <= {hi}")
    small = int(sizes.min())
    if small < K:
        return Verdict(
            False,
            f"(v) every one of {K} symbols must occur in each of {R} residue classes, "
            f"but a class has only {small} block positions in [0, {p.blocks_per_side - 1})^{d}",
        )
    bad = [int(x) for x in sizes if not K * lo <= x <= K * hi]
    if bad:
        return Verdict(False, f"(vi) residue class of size {bad[0]} cannot split into {K} counts within [{lo}, {hi}]")
    return Verdict(True)


def _count_table(word: np.ndarray, m: int, K: int) -> np.ndarray:
    L = word.shape[0]
    inner = word[(slice(0, L - 1),) * word.ndim]
    res = residue_grid(inner.shape, m)
    return _kernels.symbol_residue_counts(inner, res, K, m ** word.ndim)


def admissible(w: Pattern, s: Stage, p: StageParams) -> Verdict:
    """Conditions (v) and (vi) on the block word restricted to [0, L-1)^d, modulo m_k."""
    L = p.blocks_per_side
    K = len(s.patterns)
    if w.values.shape != (L,) * s.d or w.alphabet != K:
        raise ValueError(f"candidate geometry {w.values.shape}/{w.alphabet} != {(L,) * s.d}/{K}")
    counts = _count_table(np.asarray(w.values), s.m, K)
    return _judge_counts(counts, (L - 1) ** s.d, s.m ** s.d, K, p.d_tol, p.slack)


def _judge_counts(counts: np.ndarray, Q: int, R: int, K: int, d_tol, slack) -> Verdict:
    missing = np.argwhere(counts == 0)
    if missing.size:
        c, r = missing[0]
        return Verdict(False, f"(v) symbol {c} never occurs in residue class {r}")
    lo, hi = window_bounds(Q, R, K, d_tol, slack)
    low = np.argwhere(counts < lo)
    if low.size:
        c, r = low[0]
        return Verdict(False, f"(vi) symbol {c} in class {r}: count {counts[c, r]} < {lo} (frequency {Fraction(int(counts[c, r]), Q)})")
    high = np.argwhere(counts > hi)
    if high.size:
        c, r = high[0]
        return Verdict(False, f"(vi) symbol {c} in class {r}: count {counts[c, r]} > {hi} (frequency {Fraction(int(counts[c, r]), Q)})")
    return Verdict(True)


def exhaustive_admissible_fraction(s: Stage, p: StageParams) -> Fraction:
    """Fraction of all |C_k|^(L^d) words passing :func:`admissible`, by enumeration (cap 2**24 words)."""
    L, K, d = p.blocks_per_side, len(s.patterns), s.d
    if K ** (L ** d) > 1 << 24:
        raise ValueError("exhaustive enumeration capped at 2**24 words")
    R = s.m ** d
    grid = np.full((L,) * d, -1, dtype=np.int64)
    inner = (slice(0, L - 1),) * d
    grid[inner] = residue_grid((L - 1,) * d, s.m)
    lo, hi = window_bounds((L - 1) ** d, R, K, p.d_tol, p.slack)
    good = _kernels.count_words_in_bounds(L ** d, K, grid.ravel(), R, max(lo, 1), hi)
    return Fraction(good, K ** (L ** d))


# ---------------------------------------------------------------------------
# building
# ---------------------------------------------------------------------------

def _evaluate(s: Stage, p: StageParams, i: int):
    w = sample_candidate(s, p, i)
    if not admissible(w, s, p):
        return False, None, None
    wt = flatten_array(np.asarray(w.values, dtype=np.int64), s.array())
    N = p.blocks_per_side * s.n + 1
    rng = _rng(p.seed, s.k, i, 1) if p.fill is FillRule.RANDOM else None
    vals = _fill_values(p.fill, n_hyperplane_cells(N, s.d), rng, p.fill_values)
    return True, w.key(), _phi_inverse_array(wt, cut_index(s.n, p.blocks_per_side), vals)


def build_next(s: Stage, p: StageParams, workers: int = 1) -> Stage:
    """Rejection-sample the next stage.

    Candidates are judged independently and merged in draw order, so the
    result does not depend on ``workers``. Raises
    :class:`UnsatisfiableStageError` when the admissible set is provably
    empty or when the whole budget yields no acceptance; a partial stage
    (fewer than ``target`` patterns) is returned with ``complete=False``.
    """
    if math.gcd(s.n, s.m) != 1:
        raise BuildError("condition (iv) fails on the input stage")
    if p.m_next <= s.m:
        raise BuildError(f"m_next={p.m_next} must exceed m_k={s.m}")
    verdict = feasibility(s, p)
    if not verdict:
        raise UnsatisfiableStageError(f"stage {s.k + 1} unsatisfiable at l={p.l}: {verdict.reason}")

    accepted: list[np.ndarray] = []
    seen: set[bytes] = set()
    draws = admissible_draws = 0
    batch = max(16, 8 * workers)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        start = 0
        while start < p.budget and len(accepted) < p.target:
            idxs = range(start, min(p.budget, start + batch))
            if pool is None:
                results = [_evaluate(s, p, i) for i in idxs]
            else:
                results = list(pool.map(lambda i: _evaluate(s, p, i), idxs))
            for ok, key, W in results:
                draws += 1
                if ok:
                    admissible_draws += 1
                    # duplicates are judged on the word, so different fills never count twice
                    if key not in seen:
                        seen.add(key)
                        accepted.append(W)
                if len(accepted) == p.target:
                    break
            start += batch
    finally:
        if pool is not None:
            pool.shutdown()

    if not accepted:
        raise UnsatisfiableStageError(f"no admissible candidate for stage {s.k + 1} in {p.budget} draws")
    record = BuildRecord(p, draws, admissible_draws, len(accepted), len(accepted) == p.target)
    N = p.blocks_per_side * s.n + 1
    return Stage(
        k=s.k + 1,
        d=s.d,
        n=N,
        m=p.m_next,
        patterns=PatternSet(np.stack(accepted), Box.cube(s.d, N)),
        m_schedule=s.m_schedule + (p.m_next,),
        history=s.history + (record,),
    )


def build_stages(d: int, params: Sequence[StageParams], workers: int = 1) -> list[Stage]:
    stages = [init_stage(d)]
    for p in params:
        stages.append(build_next(stages[-1], p, workers=workers))
    return stages


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

def block_view(Wt: np.ndarray, n_block: int) -> np.ndarray:
    """(L n)^d array -> (L^d, n^d) rows, one per block in row-major block order."""
    d = Wt.ndim
    L = Wt.shape[0] // n_block
    split = Wt.reshape(sum(((L, n_block) for _ in range(d)), ()))
    order = list(range(0, 2 * d, 2)) + list(range(1, 2 * d, 2))
    return split.transpose(order).reshape(L ** d, n_block ** d)


def decompose(W: np.ndarray, lower: Stage, blocks_per_side: int) -> np.ndarray:
    """Symbols of the blocks of W (side L*n+1) over the members of ``lower``; -1 marks a foreign block.

    Blocks are compared on the skeleton of ``lower`` only.
    """
    n_block = lower.n
    d = W.ndim
    _check_side(W.shape[0], n_block, blocks_per_side, 1)
    rows = block_view(_phi_array(W, cut_index(n_block, blocks_per_side)), n_block)
    return lower.block_index.lookup(rows).reshape((blocks_per_side,) * d)


def _class_counts(word: np.ndarray, m: int, K: int) -> np.ndarray:
    """counts[c, r] on [0, L-1)^d by slicing each residue class; -1 entries are skipped."""
    d = word.ndim
    inner = word[(slice(0, word.shape[0] - 1),) * d]
    out = np.zeros((K, m ** d), dtype=np.int64)
    for r_idx, r in enumerate(np.ndindex(*(m,) * d)):
        cls = inner[tuple(slice(x, None, m) for x in r)].ravel()
        cls = cls[cls >= 0]
        out[:, r_idx] = np.bincount(cls, minlength=K)[:K]
    return out


def _build_params(stage: Stage) -> StageParams:
    if stage.k == 1:
        raise ValueError("stage 1 has no build parameters")
    return stage.history[-1].params


def check_member(stages: Sequence[Stage], k: int, W: np.ndarray, slack: Fraction = Fraction(1)) -> Verdict:
    """Admissibility predicate for an arbitrary binary pattern on A_k.

    Blocks equal to stored members of C_{k-1} count as symbols; other blocks
    are checked recursively and do not count toward any symbol's frequency.
    """
    W = np.asarray(W, dtype=np.uint8)
    stage = stages[k - 1]
    if W.shape != (stage.n,) * stage.d:
        return Verdict(False, f"shape {W.shape} != A_{k}")
    if k == 1:
        return Verdict(True)
    prev = stages[k - 2]
    p = _build_params(stage)
    L = p.blocks_per_side
    word = decompose(W, prev, L)
    foreign = np.argwhere(word < 0)
    if foreign.size:
        rows = block_view(_phi_array(W, cut_index(prev.n, L)), prev.n)
        flat_idx = np.ravel_multi_index(foreign.T, word.shape)
        checked: dict[bytes, Verdict] = {}
        for fi, g in zip(flat_idx, foreign):
            blk = rows[fi].reshape((prev.n,) * prev.d)
            key = blk.tobytes()
            if key not in checked:
                checked[key] = check_member(stages, k - 1, blk, slack)
            if not checked[key]:
                return Verdict(False, f"block {tuple(int(x) for x in g)} fails at level {k - 1}: {checked[key].reason}")
    counts = _class_counts(word, prev.m, len(prev.patterns))
    return _judge_counts(counts, (L - 1) ** stage.d, prev.m ** stage.d, len(prev.patterns), p.d_tol, slack)


@dataclass
class StageReport:
    k: int
    concatenation: bool = True
    gcd: bool = True
    coverage: bool = True
    letter_coverage: bool = True
    frequency: bool = True
    coincidence: bool = True
    slack: Fraction = Fraction(1)
    count_range: tuple[int, int] | None = None
    window: tuple[int, int] | None = None
    counterexamples: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.counterexamples

    def fail(self, condition: str, **detail):
        attr = {"iii": "concatenation", "iv": "gcd", "v": "coverage", "v-letter": "letter_coverage",
                "vi": "frequency", "coincidence": "coincidence"}[condition]
        setattr(self, attr, False)
        self.counterexamples.append({"condition": condition, **detail})

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "k": self.k,
            "pass": self.passed,
            "conditions": {
                "iii_concatenation": self.concatenation,
                "iv_gcd": self.gcd,
                "v_coverage": self.coverage,
                "v_letter_coverage": self.letter_coverage,
                "vi_frequency": self.frequency,
                "coincidence": self.coincidence,
            },
            "slack": str(self.slack),
            "count_range": list(self.count_range) if self.count_range else None,
            "window": list(self.window) if self.window else None,
            "counterexamples": self.counterexamples,
        }


def verify_stage_pair(s_k: Stage, s_next: Stage, max_witnesses: int = 20) -> StageReport:
    """Re-derive every condition for C_{k+1} over C_k with exact integer arithmetic."""
    if s_next.k != s_k.k + 1 or s_next.d != s_k.d:
        raise StagePairError(f"stages {s_k.k} and {s_next.k} are not consecutive")
    if s_next.m_schedule[:-1] != s_k.m_schedule:
        raise StagePairError("m schedules disagree")
    p = _build_params(s_next)
    L = p.blocks_per_side
    if (s_next.n - 1) % s_k.n or (s_next.n - 1) // s_k.n != L:
        raise StagePairError(f"n_{s_next.k}={s_next.n} != l*m*n_{s_k.k}+1 = {L * s_k.n + 1}")
    d, K, m = s_k.d, len(s_k.patterns), s_k.m
    rep = StageReport(k=s_next.k, slack=p.slack)

    def add(cond, **kw):
        if len(rep.counterexamples) < max_witnesses:
            rep.fail(cond, **kw)
        else:
            setattr(rep, {"iii": "concatenation", "iv": "gcd", "v": "coverage", "v-letter": "letter_coverage",
                          "vi": "frequency", "coincidence": "coincidence"}[cond], False)

    for st in (s_k, s_next):
        if math.gcd(st.n, st.m) != 1:
            add("iv", stage=st.k, n=st.n, m=st.m)

    Q = (L - 1) ** d
    lo, hi = window_bounds(Q, m ** d, K, p.d_tol, p.slack)
    rep.window = (lo, hi)
    cmin, cmax = None, None
    cut = cut_index(s_k.n, L)
    letter_res = residue_grid((L - 1,) * d, m) if m == 1 else None
    for j in range(len(s_next.patterns)):
        W = s_next.patterns.array[j]
        word = decompose(np.asarray(W), s_k, L)
        if (word < 0).any():
            g = tuple(int(x) for x in np.argwhere(word < 0)[0])
            add("iii", pattern=j, block=list(g), detail="block is not a member of C_k")
            continue
        counts = _class_counts(word, m, K)
        zero = np.argwhere(counts == 0)
        for c, r in zero[:3]:
            add("v", pattern=j, symbol=int(c), residue=int(r))
        # transported coverage: letter positions n_k*g of each block symbol, reduced mod m_k
        inner = word[(slice(0, L - 1),) * d]
        if letter_res is None:
            letter_res = _scaled_residues(L - 1, d, s_k.n, m)
        for c in range(K):
            seen = np.unique(letter_res[inner == c])
            if seen.shape[0] != m ** d:
                add("v-letter", pattern=j, symbol=c, residues_hit=int(seen.shape[0]))
                break
        lo_c, hi_c = int(counts.min()), int(counts.max())
        cmin = lo_c if cmin is None else min(cmin, lo_c)
        cmax = hi_c if cmax is None else max(cmax, hi_c)
        if lo_c < lo or hi_c > hi:
            bad = np.argwhere((counts < lo) | (counts > hi))[0]
            add("vi", pattern=j, symbol=int(bad[0]), residue=int(bad[1]),
                frequency=str(Fraction(int(counts[tuple(bad)]), Q)),
                window=[str(Fraction(lo, Q)), str(Fraction(hi, Q))])
        Wt = _phi_array(np.asarray(W), cut)
        region = (slice(0, cut),) * d
        if not np.array_equal(Wt[region], np.asarray(W)[region]):
            add("coincidence", pattern=j)
    rep.count_range = (cmin, cmax) if cmin is not None else None
    return rep


def _scaled_residues(side: int, d: int, n_block: int, m: int) -> np.ndarray:
    """Residue index of the letter position n_k*g for every block position g in [0, side)^d."""
    out = np.zeros((side,) * d, dtype=np.int64)
    for axis in range(d):
        r = ((np.arange(side) * n_block) % m).reshape([-1 if a == axis else 1 for a in range(d)])
        out = out * m + r
    return out


# ---------------------------------------------------------------------------
# finite windows of points
# ---------------------------------------------------------------------------

def centered_corner(n: int, d: int) -> tuple[int, ...]:
    return (-(n // 2),) * d


def place(stages: Sequence[Stage], K: int, w_choice: int, corner: Sequence[int] | None = None) -> Pattern:
    stage = stages[K - 1]
    corner = tuple(corner) if corner is not None else centered_corner(stage.n, stage.d)
    return Pattern(stage.patterns.array[w_choice], corner)


def window_of_point(
    stages: Sequence[Stage], K: int, w_choice: int, window: Box, corner: Sequence[int] | None = None
) -> Pattern:
    """Restriction to ``window`` of w_K placed at ``corner`` (default: centered on the origin)."""
    placed = place(stages, K, w_choice, corner)
    if not placed.support.contains(window):
        raise ValueError(f"window {window} does not fit inside the placed copy of A_{K} ({placed.support})")
    return restrict(placed, window)


# ---------------------------------------------------------------------------
# stage files
# ---------------------------------------------------------------------------

def _params_to_dict(r: BuildRecord) -> dict:
    p = r.params
    return {
        "l": p.l,
        "m": p.m_next,
        "d_tol": str(p.d_tol),
        "nu": str(p.nu),
        "target": p.target,
        "budget": p.budget,
        "seed": p.seed,
        "slack": str(p.slack),
        "fill": p.fill.value,
        "fill_values": list(p.fill_values) if p.fill_values is not None else None,
        "draws": r.draws,
        "admissible": r.admissible,
        "accepted": r.accepted,
        "complete": r.complete,
    }


def stage_to_dict(stage: Stage) -> dict:
    last = stage.last_params
    return {
        "format": FORMAT_VERSION,
        "d": stage.d,
        "k": stage.k,
        "n": stage.n,
        "m_schedule": list(stage.m_schedule),
        "l_schedule": [r.params.l for r in stage.history],
        "d_tolerances": [str(r.params.d_tol) for r in stage.history],
        "nu_schedule": [str(r.params.nu) for r in stage.history],
        "slack": str(last.slack) if last else None,
        "seed": last.seed if last else None,
        "fill_rule": last.fill.value if last else None,
        "counts": list(stage.counts),
        "complete": stage.complete,
        "history": [_params_to_dict(r) for r in stage.history],
        "patterns": [stage.patterns.array[i].tobytes().translate(_TO_ASCII).decode("ascii")
                     for i in range(len(stage.patterns))],
    }


_TO_ASCII = bytes.maketrans(b"\x00\x01", b"01")
_FROM_ASCII = bytes.maketrans(b"01", b"\x00\x01")


def stage_from_dict(obj: dict) -> Stage:
    if obj.get("format") != FORMAT_VERSION:
        raise ValueError(f"unsupported stage file format {obj.get('format')!r}")
    d, k, n = int(obj["d"]), int(obj["k"]), int(obj["n"])
    history = []
    for h in obj["history"]:
        params = StageParams(
            l=int(h["l"]), m_next=int(h["m"]), d_tol=Fraction(h["d_tol"]), nu=Fraction(h["nu"]),
            target=int(h["target"]), budget=int(h["budget"]), seed=int(h["seed"]),
            slack=Fraction(h["slack"]), fill=FillRule(h["fill"]),
            fill_values=tuple(h["fill_values"]) if h.get("fill_values") is not None else None,
        )
        history.append(BuildRecord(params, int(h["draws"]), int(h["admissible"]), int(h["accepted"]), bool(h["complete"])))
    if [r.params.l for r in history] != list(obj["l_schedule"]):
        raise ValueError("l_schedule disagrees with history")
    if [str(r.params.d_tol) for r in history] != list(obj["d_tolerances"]):
        raise ValueError("d_tolerances disagree with history")
    if [str(r.params.nu) for r in history] != list(obj["nu_schedule"]):
        raise ValueError("nu_schedule disagrees with history")
    pats = obj["patterns"]
    size = n ** d
    arr = np.empty((len(pats), size), dtype=np.uint8)
    for i, s in enumerate(pats):
        if len(s) != size or s.strip("01"):
            raise ValueError(f"pattern {i} is not a 0/1 string of length {size}")
        arr[i] = np.frombuffer(s.encode("ascii").translate(_FROM_ASCII), dtype=np.uint8)
    m_sched = tuple(int(x) for x in obj["m_schedule"])
    stage = Stage(
        k=k, d=d, n=n, m=m_sched[-1],
        patterns=PatternSet(arr.reshape((len(pats),) + (n,) * d), Box.cube(d, n)),
        m_schedule=m_sched, history=tuple(history),
    )
    if list(stage.counts) != list(obj["counts"]):
        raise ValueError("counts disagree with history and pattern list")
    return stage


def dumps_stage(stage: Stage) -> str:
    return json.dumps(stage_to_dict(stage), indent=1) + "\n"


def loads_stage(text: str) -> Stage:
    return stage_from_dict(json.loads(text))


def write_stage(stage: Stage, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_stage(stage))


def read_stage(path) -> Stage:
    with open(path, encoding="utf-8") as fh:
        return loads_stage(fh.read())


def with_patterns(stage: Stage, arr: np.ndarray) -> Stage:
    """Same stage metadata with a replaced pattern list (used for tampering tests and hand-built stages)."""
    arr = np.asarray(arr, dtype=np.uint8)
    hist = stage.history
    if hist:
        hist = hist[:-1] + (replace(hist[-1], accepted=arr.shape[0]),)
    return replace(stage, patterns=PatternSet(arr, stage.patterns.support), history=hist)
