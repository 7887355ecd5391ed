"""Finite configurations on boxes, occurrence sets and exact frequencies.

Values are stored row-major with the last coordinate varying fastest, which
is numpy's C order. Occurrence positions are translations ``g`` such that
``support(b1) + g`` lies inside ``support(b2)``; the "center" of a placed
copy is its corner, ``corner(b1) + g``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .lattice import Box, Sublattice, Vector, as_vector


class AlphabetError(ValueError):
    pass


def _frozen(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=np.uint8, copy=True)
    arr.setflags(write=False)
    return arr


class Pattern:
    """A pattern ``b_A``: symbols in [0, alphabet) on the box ``support``."""

    __slots__ = ("values", "corner", "alphabet", "_key")

    def __init__(self, values, corner: Iterable[int] | None = None, alphabet: int = 2):
        arr = np.asarray(values)
        if arr.ndim == 0:
            raise ValueError("pattern values need at least one dimension")
        if alphabet < 2 or alphabet > 256:
            raise AlphabetError(f"alphabet size {alphabet} out of range [2, 256]")
        if arr.size and (arr.min() < 0 or arr.max() >= alphabet):
            raise AlphabetError(f"symbols must lie in [0, {alphabet})")
        self.values = _frozen(arr)
        self.corner = as_vector(corner if corner is not None else 0, arr.ndim)
        self.alphabet = int(alphabet)
        self._key = None

    # construction helpers -------------------------------------------------
    @classmethod
    def from_string(cls, s: str, corner: int | Sequence[int] = 0, alphabet: int = 2) -> "Pattern":
        return cls(np.array([int(ch) for ch in s], dtype=np.uint8), as_vector(corner, 1), alphabet)

    @classmethod
    def from_rows(cls, rows: Sequence[str], corner: Sequence[int] = (0, 0), alphabet: int = 2) -> "Pattern":
        arr = np.array([[int(ch) for ch in row] for row in rows], dtype=np.uint8)
        return cls(arr, corner, alphabet)

    @classmethod
    def constant(cls, box: Box, symbol: int, alphabet: int = 2) -> "Pattern":
        return cls(np.full(box.shape, symbol, dtype=np.uint8), box.corner, alphabet)

    # basic properties ------------------------------------------------------
    @property
    def support(self) -> Box:
        return Box(self.corner, self.values.shape)

    @property
    def d(self) -> int:
        return self.values.ndim

    def __getitem__(self, g: Sequence[int]) -> int:
        return int(self.values[tuple(x - c for x, c in zip(g, self.corner))])

    def to_string(self) -> str:
        """Row-major symbol string (the stage-file payload)."""
        return "".join(str(int(v)) for v in self.values.ravel())

    def key(self) -> bytes:
        if self._key is None:
            self._key = self.values.tobytes()
        return self._key

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pattern):
            return NotImplemented
        return (
            self.corner == other.corner
            and self.alphabet == other.alphabet
            and self.values.shape == other.values.shape
            and self.key() == other.key()
        )

    def __hash__(self) -> int:
        return hash((self.corner, self.values.shape, self.alphabet, self.key()))

    def __repr__(self) -> str:
        body = self.to_string()
        if len(body) > 40:
            body = body[:37] + "..."
        return f"Pattern(support={self.support.shape}@{self.corner}, c={self.alphabet}, {body!r})"


@dataclass(frozen=True)
class OccurrenceQuery:
    """Restrict occurrences to placements whose corner is congruent to ``h`` modulo ``F``."""

    h: Vector
    F: Sublattice

    def __post_init__(self):
        object.__setattr__(self, "h", as_vector(self.h, self.F.d))


class PatternSet:
    """Distinct patterns sharing one support and alphabet, stored as a stacked array."""

    def __init__(self, patterns: Iterable[Pattern] | np.ndarray, support: Box | None = None, alphabet: int = 2):
        if isinstance(patterns, np.ndarray):
            if support is None:
                support = Box((0,) * (patterns.ndim - 1), patterns.shape[1:])
            stack = np.asarray(patterns, dtype=np.uint8)
        else:
            patterns = list(patterns)
            if not patterns:
                raise ValueError("empty pattern set")
            support = support or patterns[0].support
            alphabet = patterns[0].alphabet
            for p in patterns:
                if p.support != support or p.alphabet != alphabet:
                    raise ValueError("patterns in a set must share support and alphabet")
            stack = np.stack([p.values for p in patterns])
        if stack.shape[1:] != support.shape:
            raise ValueError("pattern stack does not match support shape")
        if stack.size and stack.max() >= alphabet:
            raise AlphabetError("symbol outside alphabet")
        self.support = support
        self.alphabet = alphabet
        self.array = _frozen(stack)
        self._index: dict[bytes, int] = {}
        for i in range(stack.shape[0]):
            k = self.array[i].tobytes()
            if k in self._index:
                raise ValueError(f"duplicate pattern at position {i}")
            self._index[k] = i

    def __len__(self) -> int:
        return self.array.shape[0]

    def __getitem__(self, i: int) -> Pattern:
        return Pattern(self.array[i], self.support.corner, self.alphabet)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def index_of(self, values: np.ndarray | Pattern) -> int:
        """Index of a member with these values, or -1."""
        arr = values.values if isinstance(values, Pattern) else np.asarray(values, dtype=np.uint8)
        if arr.shape != self.support.shape:
            return -1
        return self._index.get(np.ascontiguousarray(arr, dtype=np.uint8).tobytes(), -1)

    def __contains__(self, p) -> bool:
        return self.index_of(p) >= 0

    def lexicographic_order(self) -> list[int]:
        flat = self.array.reshape(len(self), -1)
        return sorted(range(len(self)), key=lambda i: flat[i].tobytes())

    def block_keys(self) -> np.ndarray:
        """Integer key per member (binary alphabets, at most 62 cells), for vectorized lookup."""
        flat = self.array.reshape(len(self), -1).astype(np.int64)
        if self.alphabet != 2 or flat.shape[1] > 62:
            raise ValueError("integer keys need a binary alphabet and at most 62 cells")
        return flat @ (1 << np.arange(flat.shape[1], dtype=np.int64))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def restrict(b: Pattern, A1: Box) -> Pattern:
    if not b.support.contains(A1):
        raise ValueError(f"{A1} is not contained in the support {b.support}")
    return Pattern(b.values[A1.slices(b.corner)], A1.corner, b.alphabet)


def translate(b: Pattern, g: Sequence[int]) -> Pattern:
    g = as_vector(g, b.d)
    return Pattern(b.values, tuple(c + x for c, x in zip(b.corner, g)), b.alphabet)


def _placement_mask(b1: Pattern, b2: Pattern, query: OccurrenceQuery | None) -> np.ndarray:
    if b1.alphabet != b2.alphabet:
        raise AlphabetError("patterns use different alphabets")
    if b1.d != b2.d:
        raise ValueError("dimension mismatch")
    mask = _kernels.match_mask(b2.values, b1.values)
    if query is not None and mask.size:
        if query.F.d != b1.d:
            raise ValueError("query dimension mismatch")
        m = query.F.m
        # placement index p puts the copy's corner at corner(b2) + p
        for axis in range(b1.d):
            ok = (np.arange(mask.shape[axis]) + b2.corner[axis] - query.h[axis]) % m == 0
            view = [1] * b1.d
            view[axis] = -1
            mask = mask & ok.reshape(view)
    return mask


def occurrences(b1: Pattern, b2: Pattern, query: OccurrenceQuery | None = None) -> list[Vector]:
    """Sorted translations g with b2 restricted to support(b1)+g equal to b1 moved by g."""
    mask = _placement_mask(b1, b2, query)
    shift = np.array(b2.corner) - np.array(b1.corner)
    return [tuple(int(x) for x in p + shift) for p in np.argwhere(mask)]


def occurrence_count(b1: Pattern, b2: Pattern, query: OccurrenceQuery | None = None) -> int:
    return int(_placement_mask(b1, b2, query).sum())


def frequency(b1: Pattern, b2: Pattern, query: OccurrenceQuery | None = None) -> Fraction:
    size = b2.support.size
    if size == 0:
        raise ValueError("frequency in an empty pattern is undefined")
    return Fraction(occurrence_count(b1, b2, query), size)


def flatten_array(word: np.ndarray, blocks: np.ndarray) -> np.ndarray:
    """Concatenate ``blocks[word[g]]`` at offsets n*g. ``blocks`` has shape (K, n, ..., n)."""
    d = word.ndim
    n = blocks.shape[1]
    tiles = blocks[word]  # shape (L1..Ld, n..n)
    order = [ax for pair in zip(range(d), range(d, 2 * d)) for ax in pair]
    return tiles.transpose(order).reshape(tuple(s * n for s in word.shape))


def flatten(w: Pattern, blocks: PatternSet) -> Pattern:
    """Binary pattern W with W(n*g + h) = blocks[w(g)](h); support scaled by the block side n."""
    if w.alphabet != len(blocks):
        raise AlphabetError(f"word alphabet {w.alphabet} != number of blocks {len(blocks)}")
    if not blocks.support.is_cube:
        raise ValueError("blocks must be cubes")
    n = blocks.support.side
    arr = flatten_array(np.asarray(w.values, dtype=np.int64), np.asarray(blocks.array))
    return Pattern(arr, tuple(n * c for c in w.corner), blocks.alphabet)


# ---------------------------------------------------------------------------
# text form: "d n c corner..." then n^(d-1) lines of n symbols
# ---------------------------------------------------------------------------

def format_pattern(b: Pattern) -> str:
    if not b.support.is_cube:
        raise ValueError("text form covers cubic supports only")
    if b.alphabet > 10:
        raise ValueError("text form covers alphabets of size <= 10")
    d, n = b.d, b.support.side
    head = " ".join(str(x) for x in (d, n, b.alphabet, *b.corner))
    if n == 0:
        return head + "\n"
    rows = b.values.reshape(-1, n)
    return head + "\n" + "\n".join("".join(str(int(v)) for v in row) for row in rows) + "\n"


def parse_pattern(text: str) -> Pattern:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty pattern text")
    head = [int(x) for x in lines[0].split()]
    if len(head) < 3:
        raise ValueError("header must be 'd n c corner...'")
    d, n, c = head[:3]
    corner = tuple(head[3:]) or (0,) * d
    if len(corner) != d:
        raise ValueError(f"header gives {len(corner)} corner coordinates for d={d}")
    body = lines[1:]
    expected = n ** (d - 1) if n else 0
    if len(body) != expected or any(len(row) != n for row in body):
        raise ValueError(f"expected {expected} lines of {n} symbols")
    vals = np.array([[int(ch) for ch in row] for row in body], dtype=np.uint8).reshape((n,) * d) if n else np.zeros((0,) * d, np.uint8)
    return Pattern(vals, corner, c)
