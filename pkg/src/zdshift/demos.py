"""Finite witnesses for divergent sparse averages and for escape points.

Both demos work on one placed copy of A_K and report exact rationals. They
show finite behavior only: two words sharing a central window whose sparse
averages end up near 0 and near 1, and a word whose value at the origin
differs from its value at every point of a sparse set.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .construction import Stage
from .embedding import Assignment, embed, embed_except, central_offset, frozen_block
from .lattice import Box, Vector
from .patterns import Pattern, translate
from .sparse import SparseSet


class EmptyAverageError(ValueError):
    pass


def sparse_average(x: Pattern, P: SparseSet, n: int) -> Fraction:
    """Share of points of P cap (-n, n)^d where x is 1."""
    box = Box.open_cube(x.d, n)
    if not x.support.contains(box):
        raise ValueError(f"(-{n}, {n})^{x.d} is not inside the support {x.support}")
    pts = P.within(box)
    if pts.shape[0] == 0:
        raise EmptyAverageError(f"P has no points in (-{n}, {n})^{x.d}")
    rel = pts - np.array(x.corner)
    return Fraction(int(x.values[tuple(rel.T)].sum()), pts.shape[0])


@dataclass(frozen=True)
class AverageSeries:
    points: tuple[tuple[int, Fraction], ...]

    def __post_init__(self):
        ns = [n for n, _ in self.points]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("radii must be strictly increasing")

    @property
    def final(self) -> Fraction:
        return self.points[-1][1]

    def to_list(self) -> list:
        return [[n, f"{v.numerator}/{v.denominator}"] for n, v in self.points]


def average_series(x: Pattern, P: SparseSet, radii: Sequence[int]) -> AverageSeries:
    return AverageSeries(tuple((int(n), sparse_average(x, P, n)) for n in radii))


def doubling_radii(k0: int, r_max: int) -> list[int]:
    out = []
    r = max(k0, 1)
    while r < r_max:
        out.append(r)
        r *= 2
    out.append(r_max)
    return out


@dataclass
class DivergenceReport:
    series0: AverageSeries
    series1: AverageSeries
    preserved_radius: int
    shared_window: bool
    frozen: Box
    g0: Vector
    reported_n: int
    y0: Pattern = field(repr=False)
    y1: Pattern = field(repr=False)

    @property
    def verified(self) -> bool:
        return self.shared_window

    def to_dict(self) -> dict:
        return {
            "format": 1,
            "series0": self.series0.to_list(),
            "series1": self.series1.to_list(),
            "preserved_radius": self.preserved_radius,
            "verified": self.verified,
            "frozen_block": {"corner": list(self.frozen.corner), "shape": list(self.frozen.shape)},
            "g0": list(self.g0),
            "assignment_exact_outside": self.reported_n,
            "membership": "admissibility predicate at full width",
            "scope": "finite witness on one placed copy of A_K",
        }


def demo_divergence(
    stages: Sequence[Stage],
    P: SparseSet,
    k0: int,
    radii: Sequence[int] | None = None,
    K: int | None = None,
    template: int | None = None,
) -> DivergenceReport:
    """y0 / y1: one template, zeros / ones written on P outside the preserved central block."""
    K = K or len(stages)
    d = stages[0].d
    preserve = Box.open_cube(d, k0)
    # center the finest sub-block able to hold (-k0, k0)^d on the origin
    level = next(j for j in range(1, K + 1) if stages[j - 1].n >= 2 * k0 - 1)
    if level >= K:
        raise ValueError(f"(-{k0}, {k0})^{d} needs a sub-block below level {K}")
    g0 = central_offset(stages, K, level)
    box = Box.cube(d, stages[K - 1].n, g0)
    r0 = embed_except(stages, K, preserve, Assignment.constant(P, box, 0), P, template)
    r1 = embed_except(stages, K, preserve, Assignment.constant(P, box, 1), P, template)
    y0 = translate(r0.pattern, g0)
    y1 = translate(r1.pattern, g0)
    shared = bool(np.array_equal(y0.values[preserve.slices(y0.corner)], y1.values[preserve.slices(y1.corner)]))
    r_max = min(min(1 - c, u) for c, u in zip(box.corner, box.upper))
    radii = list(radii) if radii is not None else doubling_radii(k0, r_max)
    return DivergenceReport(
        series0=average_series(y0, P, radii),
        series1=average_series(y1, P, radii),
        preserved_radius=k0,
        shared_window=shared,
        frozen=r0.frozen,
        g0=g0,
        reported_n=r0.n,
        y0=y0,
        y1=y1,
    )


@dataclass
class EscapeReport:
    window: Box
    checks: list[tuple[Vector, int, int]]
    origin_value: int
    distinct_witness: list[Vector] | None = None
    x: Pattern | None = field(default=None, repr=False)

    @property
    def verified(self) -> bool:
        return self.origin_value == 0 and all(xg != x0 for _, xg, x0 in self.checks)

    def to_dict(self) -> dict:
        return {
            "format": 1,
            "window": {"corner": list(self.window.corner), "shape": list(self.window.shape)},
            "origin_value": self.origin_value,
            "checked_points": len(self.checks),
            "failures": [list(g) for g, xg, x0 in self.checks if xg == x0],
            "verified": self.verified,
            "distinct_witness": [list(g) for g in self.distinct_witness] if self.distinct_witness is not None else None,
            "membership": "admissibility predicate at full width",
            "scope": "finite witness on one placed copy of A_K",
        }


def escape_assignment(P: SparseSet, G: SparseSet, box: Box, b: dict) -> Assignment:
    """0 at the origin, 1 on P, ``b`` (default 0) on G, restricted to ``box``."""
    d = box.d
    vals = {tuple(int(x) for x in g): int(b.get(tuple(int(x) for x in g), 0)) for g in G.within(box)}
    for p in P.within(box):
        vals[tuple(int(x) for x in p)] = 1
    origin = (0,) * d
    if box.contains_point(origin):
        vals[origin] = 0
    return Assignment(box.corner, vals)


def demo_escape(
    stages: Sequence[Stage],
    P: SparseSet,
    G: SparseSet,
    window: Box | None = None,
    K: int | None = None,
    flip: Vector | None = None,
    template: int | None = None,
) -> EscapeReport:
    """Embed 0 at the origin and 1 on P, then check x(g) != x(0) for every g in P cap window.

    With ``flip`` (a point of G) a second word with b flipped there is built and the
    cells where the two words differ are reported.
    """
    K = K or len(stages)
    d = stages[0].d
    origin = (0,) * d
    if origin in P:
        raise ValueError("P must not contain the origin")
    if not G.isdisjoint(P):
        raise ValueError("G must be disjoint from P")
    n = stages[K - 1].n
    g0 = tuple(-(n // 2) for _ in range(d))
    box = Box.cube(d, n, g0)
    window = window or box
    if not box.contains(window):
        raise ValueError(f"window {window} is not inside the placed copy {box}")
    P_prime = G.union(P).union(SparseSet(d, [origin]))
    a = escape_assignment(P, G, box, {})
    x = translate(embed(stages, K, a, P_prime, template), g0)
    x0 = x[origin]
    checks = [(tuple(int(v) for v in g), x[g], x0) for g in P.within(window)]
    witness = None
    if flip is not None:
        flip = tuple(flip)
        if flip not in G or not box.contains_point(flip):
            raise ValueError(f"{flip} is not a point of G inside the placed copy")
        a2 = escape_assignment(P, G, box, {flip: 1 - a.values[flip]})
        # a minimal edit of x, so the two words differ only where admissibility forces it
        x2 = translate(embed(stages, K, a2, P_prime, start=x.values), g0)
        diff = np.argwhere(x.values != x2.values) + np.array(g0)
        witness = [tuple(int(v) for v in p) for p in diff]
    return EscapeReport(window, checks, x0, witness, x)
