"""Geometry of Z^d: boxes, diagonal sublattices m*Z^d and subgroup schedules."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

Vector = tuple[int, ...]


def as_vector(g: Iterable[int] | int, d: int | None = None) -> Vector:
    if isinstance(g, (int, np.integer)):
        if d is None:
            raise ValueError("dimension required to broadcast a scalar")
        return (int(g),) * d
    v = tuple(int(x) for x in g)
    if d is not None and len(v) != d:
        raise ValueError(f"expected a {d}-vector, got {len(v)} coordinates")
    return v


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[c_1, c_1+s_1) x ... x [c_d, c_d+s_d)``.

    Cubes (all sides equal) are the common case; use :meth:`cube`.
    """

    corner: Vector
    shape: Vector

    def __post_init__(self):
        object.__setattr__(self, "corner", as_vector(self.corner))
        object.__setattr__(self, "shape", as_vector(self.shape))
        if len(self.corner) != len(self.shape):
            raise ValueError("corner and shape dimensions differ")
        if not self.corner:
            raise ValueError("dimension must be positive")
        if any(s < 0 for s in self.shape):
            raise ValueError("negative side length")

    @classmethod
    def cube(cls, d: int, n: int, corner: Iterable[int] | int = 0) -> "Box":
        return cls(as_vector(corner, d), (n,) * d)

    @classmethod
    def open_cube(cls, d: int, n: int) -> "Box":
        """The box (-n, n)^d, i.e. [-n+1, n)^d."""
        if n < 1:
            return cls((0,) * d, (0,) * d)
        return cls((1 - n,) * d, (2 * n - 1,) * d)

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def side(self) -> int:
        if len(set(self.shape)) != 1:
            raise ValueError(f"box {self.shape} is not a cube")
        return self.shape[0]

    @property
    def is_cube(self) -> bool:
        return len(set(self.shape)) == 1

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @property
    def upper(self) -> Vector:
        return tuple(c + s for c, s in zip(self.corner, self.shape))

    def is_empty(self) -> bool:
        return self.size == 0

    def contains_point(self, g: Sequence[int]) -> bool:
        return all(c <= x < c + s for x, c, s in zip(g, self.corner, self.shape))

    def contains(self, other: "Box") -> bool:
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        if other.is_empty():
            return True
        return all(
            c <= oc and oc + os <= c + s
            for c, s, oc, os in zip(self.corner, self.shape, other.corner, other.shape)
        )

    def translate(self, g: Sequence[int]) -> "Box":
        g = as_vector(g, self.d)
        return Box(tuple(c + x for c, x in zip(self.corner, g)), self.shape)

    def intersect(self, other: "Box") -> "Box":
        lo = [max(a, b) for a, b in zip(self.corner, other.corner)]
        hi = [min(a, b) for a, b in zip(self.upper, other.upper)]
        return Box(tuple(lo), tuple(max(0, h - l) for l, h in zip(lo, hi)))

    def slices(self, origin: Sequence[int] | None = None) -> tuple[slice, ...]:
        """Array slices selecting this box inside an array whose cell 0 sits at ``origin``."""
        origin = origin or (0,) * self.d
        return tuple(slice(c - o, c - o + s) for c, o, s in zip(self.corner, origin, self.shape))

    def cells(self) -> Iterable[Vector]:
        return itertools.product(*(range(c, c + s) for c, s in zip(self.corner, self.shape)))


@dataclass(frozen=True)
class Sublattice:
    """The diagonal subgroup m * Z^d."""

    d: int
    m: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if self.m < 1:
            raise ValueError("modulus must be a positive integer")

    def intersection(self, other: "Sublattice") -> "Sublattice":
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        return Sublattice(self.d, math.lcm(self.m, other.m))


def index(F: Sublattice) -> int:
    return F.m ** F.d


def congruent(g1: Sequence[int], g2: Sequence[int], F: Sublattice) -> bool:
    if len(g1) != F.d or len(g2) != F.d:
        raise ValueError(f"vectors must have dimension {F.d}")
    return all((a - b) % F.m == 0 for a, b in zip(g1, g2))


def residues(F: Sublattice) -> list[Vector]:
    """Canonical complete residue set [0, m)^d, lexicographic."""
    return list(itertools.product(range(F.m), repeat=F.d))


def residue_index(g: Sequence[int], F: Sublattice) -> int:
    """Position of the residue class of ``g`` inside :func:`residues`."""
    r = 0
    for x in g:
        r = r * F.m + (x % F.m)
    return r


def residue_grid(shape: Sequence[int], m: int, corner: Sequence[int] | None = None) -> np.ndarray:
    """Array of residue indices (as in :func:`residue_index`) for every cell of a box."""
    corner = corner or (0,) * len(shape)
    out = np.zeros(tuple(shape), dtype=np.int64)
    for axis, (s, c) in enumerate(zip(shape, corner)):
        r = (np.arange(c, c + s) % m).reshape([-1 if a == axis else 1 for a in range(len(shape))])
        out = out * m + r
    return out


@dataclass(frozen=True)
class SubgroupSchedule:
    moduli: tuple[int, ...]

    def __post_init__(self):
        mods = tuple(int(m) for m in self.moduli)
        object.__setattr__(self, "moduli", mods)
        if not mods or mods[0] < 1:
            raise ValueError("moduli must be positive")
        if any(b <= a for a, b in zip(mods, mods[1:])):
            raise ValueError("moduli must be strictly increasing")

    @classmethod
    def factorial(cls, K: int) -> "SubgroupSchedule":
        """m_k = k!, k = 1..K."""
        return cls(tuple(math.factorial(k) for k in range(1, K + 1)))

    def sublattice(self, k: int, d: int) -> Sublattice:
        return Sublattice(d, self.moduli[k - 1])


def schedule_cofinal(s: SubgroupSchedule | Sequence[int], M: int) -> bool:
    """True iff every 1 <= m <= M divides some modulus of the schedule."""
    mods = s.moduli if isinstance(s, SubgroupSchedule) else tuple(s)
    return all(any(mk % m == 0 for mk in mods) for m in range(1, M + 1))
