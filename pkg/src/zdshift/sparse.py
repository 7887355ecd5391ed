"""Sparse subsets of Z^d: explicit and polynomial orbits, finite density estimates."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .lattice import Box, Vector


class Generator(str, enum.Enum):
    EXPLICIT = "EXPLICIT"
    POLYNOMIAL = "POLYNOMIAL"


def _poly(coeffs: Sequence[int], n: int) -> int:
    v = 0
    for c in reversed(coeffs):
        v = v * n + int(c)
    return v


class SparseSet:
    """A finite set of lattice points, optionally known only inside a materialization window.

    When ``window`` is given the set is authoritative inside it and unknown outside;
    queries on boxes not contained in the window are refused.
    """

    def __init__(
        self,
        d: int,
        points: Iterable[Sequence[int]],
        window: Box | None = None,
        generator: Generator = Generator.EXPLICIT,
        coeffs: tuple[tuple[int, ...], ...] | None = None,
        param_range: tuple[int, int] | None = None,
    ):
        if d < 1:
            raise ValueError("dimension must be positive")
        pts = sorted({tuple(int(x) for x in p) for p in points})
        if any(len(p) != d for p in pts):
            raise ValueError(f"points must have {d} coordinates")
        if window is not None and any(not window.contains_point(p) for p in pts):
            raise ValueError("explicit points must lie in the window")
        self.d = d
        self.window = window
        self.generator = Generator(generator)
        self.coeffs = coeffs
        self.param_range = param_range
        self._points = np.array(pts, dtype=np.int64).reshape(len(pts), d)
        self._set = frozenset(pts)

    # basic access -----------------------------------------------------------
    @property
    def points(self) -> np.ndarray:
        return self._points

    def __len__(self) -> int:
        return self._points.shape[0]

    def __iter__(self):
        return iter(tuple(int(x) for x in p) for p in self._points)

    def __contains__(self, g) -> bool:
        return tuple(int(x) for x in g) in self._set

    def as_set(self) -> frozenset[Vector]:
        return self._set

    def _check_known(self, box: Box):
        if self.window is not None and not self.window.contains(box):
            raise ValueError(f"{box} exceeds the materialization window {self.window}")

    def within(self, box: Box) -> np.ndarray:
        """Points inside ``box`` (lexicographically sorted)."""
        self._check_known(box)
        if len(self) == 0:
            return self._points
        lo = np.array(box.corner)
        hi = np.array(box.upper)
        keep = np.all((self._points >= lo) & (self._points < hi), axis=1)
        return self._points[keep]

    def count_in(self, box: Box) -> int:
        return int(self.within(box).shape[0])

    # set algebra ------------------------------------------------------------
    def union(self, other: "SparseSet") -> "SparseSet":
        window = None
        if self.window is not None and other.window is not None:
            window = self.window.intersect(other.window)
            return SparseSet(self.d, [p for p in self._set | other._set if window.contains_point(p)], window)
        return SparseSet(self.d, self._set | other._set, window)

    def difference(self, other: "SparseSet") -> "SparseSet":
        return SparseSet(self.d, self._set - other._set, self.window)

    def isdisjoint(self, other: "SparseSet") -> bool:
        return self._set.isdisjoint(other._set)

    def __repr__(self) -> str:
        return f"SparseSet(d={self.d}, {len(self)} points, {self.generator.value})"


def explicit(points: Iterable[Sequence[int]], d: int | None = None, window: Box | None = None) -> SparseSet:
    pts = [tuple(p) for p in points]
    if d is None:
        if not pts:
            raise ValueError("dimension needed for an empty set")
        d = len(pts[0])
    return SparseSet(d, pts, window)


def polynomial_orbit(coeffs: Sequence[Sequence[int]], param_range: tuple[int, int]) -> SparseSet:
    """{(p_1(n), ..., p_d(n)) : a <= n < b}; coefficients in increasing degree order."""
    coeffs = tuple(tuple(int(c) for c in cs) for cs in coeffs)
    if not coeffs or any(len(cs) == 0 for cs in coeffs):
        raise ValueError("every coordinate needs a non-empty coefficient list")
    a, b = (int(x) for x in param_range)
    pts = [tuple(_poly(cs, n) for cs in coeffs) for n in range(a, b)]
    return SparseSet(len(coeffs), pts, None, Generator.POLYNOMIAL, coeffs, (a, b))


def squares(limit: int, start: int = 0) -> SparseSet:
    """1-D squares n^2 with start <= n, covering at least [0, limit)."""
    top = int(np.sqrt(max(limit, 0))) + 2
    return polynomial_orbit([[0, 0, 1]], (start, top))


# ---------------------------------------------------------------------------
# density
# ---------------------------------------------------------------------------

def _indicator(P: SparseSet, window: Box) -> np.ndarray:
    grid = np.zeros(window.shape, dtype=np.int64)
    pts = P.within(window)
    if pts.shape[0]:
        grid[tuple((pts - np.array(window.corner)).T)] = 1
    return grid


def _summed_area(grid: np.ndarray) -> np.ndarray:
    sat = np.zeros(tuple(s + 1 for s in grid.shape), dtype=np.int64)
    inner = grid
    for axis in range(grid.ndim):
        inner = np.cumsum(inner, axis=axis)
    sat[(slice(1, None),) * grid.ndim] = inner
    return sat


def _box_sums(sat: np.ndarray, side: Sequence[int], grid_step: int) -> np.ndarray:
    """Sums over all boxes of the given side with corners on the grid."""
    d = sat.ndim
    total = 0
    for signs in np.ndindex(*(2,) * d):
        idx = []
        for axis, s in enumerate(signs):
            n_corners = sat.shape[axis] - 1 - side[axis] + 1
            start = side[axis] if s else 0
            idx.append(slice(start, start + n_corners, grid_step))
        term = sat[tuple(idx)]
        total = total + (term if (d - sum(signs)) % 2 == 0 else -term)
    return total


def side_ladder(side: int, min_side: int) -> list[int]:
    out = []
    s = 1
    while s < side:
        if s >= min_side:
            out.append(s)
        s *= 2
    out.append(side)
    return out


def banach_density(P: SparseSet, window: Box, grid: int = 1, min_side: int | None = None) -> Fraction:
    """max |P cap R| / |R| over rectangles R in ``window`` with corners on ``grid``.

    Side lengths per axis run over the doubling ladder 2^j >= ``min_side``, plus the
    full window side. The default cut-off is an eighth of the smallest window side.
    """
    if window.is_empty():
        raise ValueError("empty window")
    if grid < 1:
        raise ValueError("grid step must be positive")
    if min_side is None:
        min_side = max(1, min(window.shape) // 8)
    sat = _summed_area(_indicator(P, window))
    ladders = [side_ladder(s, min_side) for s in window.shape]
    best = Fraction(0)
    for side in _product(ladders):
        sums = _box_sums(sat, side, grid)
        if sums.size:
            cand = Fraction(int(sums.max()), int(np.prod(side)))
            if cand > best:
                best = cand
    return best


def _product(lists):
    if not lists:
        yield ()
        return
    for x in lists[0]:
        for rest in _product(lists[1:]):
            yield (x,) + rest


@dataclass(frozen=True)
class DensityCertificate:
    epsilon: Fraction
    worst_placement: Vector | None
    hits: int
    region_size: int

    def to_dict(self) -> dict:
        return {
            "epsilon": str(self.epsilon),
            "worst_placement": list(self.worst_placement) if self.worst_placement is not None else None,
            "hits": self.hits,
            "region_size": self.region_size,
        }


def density_certificate(P: SparseSet, region: np.ndarray, placements: Sequence[Sequence[int]]) -> DensityCertificate:
    """max over placements g of |P cap (region + g)| / |region|, exactly.

    ``region`` is a boolean mask whose cell 0 sits at the origin.
    """
    region = np.asarray(region, dtype=np.bool_)
    size = int(region.sum())
    if size == 0:
        raise ValueError("empty region")
    pl = np.asarray(placements, dtype=np.int64).reshape(-1, region.ndim)
    if pl.shape[0] == 0:
        return DensityCertificate(Fraction(0), None, 0, size)
    for g in pl:
        P._check_known(Box(tuple(int(x) for x in g), region.shape))
    counts = _kernels.points_in_mask(P.points, region, pl)
    i = int(np.argmax(counts))
    return DensityCertificate(Fraction(int(counts[i]), size), tuple(int(x) for x in pl[i]), int(counts[i]), size)


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------

def parse_sparse(text: str, d: int | None = None, window: Box | None = None) -> SparseSet:
    """Either lines of d integers or JSON {"polynomial": [[c0, c1, ...], ...], "range": [a, b]}."""
    body = text.strip()
    if body.startswith("{"):
        obj = json.loads(body)
        if obj.get("format", 1) != 1:
            raise ValueError(f"unsupported format {obj.get('format')!r}")
        if "polynomial" in obj:
            return polynomial_orbit(obj["polynomial"], tuple(obj["range"]))
        if "points" in obj:
            pts = [tuple(p) for p in obj["points"]]
            return SparseSet(d or int(obj.get("d", len(pts[0]) if pts else 1)), pts, window)
        raise ValueError("JSON sparse set needs 'polynomial' and 'range'")
    pts = []
    for ln in body.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if ln:
            pts.append(tuple(int(x) for x in ln.split()))
    if d is None:
        if not pts:
            raise ValueError("cannot infer the dimension of an empty point list")
        d = len(pts[0])
    return SparseSet(d, pts, window)


def read_sparse(path, d: int | None = None, window: Box | None = None) -> SparseSet:
    with open(path, encoding="utf-8") as fh:
        return parse_sparse(fh.read(), d, window)


def format_sparse(P: SparseSet) -> str:
    if P.generator is Generator.POLYNOMIAL:
        return json.dumps({"format": 1, "polynomial": [list(c) for c in P.coeffs], "range": list(P.param_range)}) + "\n"
    return "".join(" ".join(str(x) for x in p) + "\n" for p in P)
