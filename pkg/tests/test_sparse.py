import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from zdshift.construction import skeleton_mask
from zdshift.lattice import Box
from zdshift.sparse import (
    Generator,
    SparseSet,
    banach_density,
    density_certificate,
    explicit,
    format_sparse,
    parse_sparse,
    polynomial_orbit,
    read_sparse,
    side_ladder,
    squares,
)


def test_polynomial_orbit_examples():
    assert polynomial_orbit([[0, 0, 1]], (0, 4)).as_set() == {(0,), (1,), (4,), (9,)}
    assert polynomial_orbit([[0, 1], [0, 0, 1]], (0, 3)).as_set() == {(0, 0), (1, 1), (2, 4)}
    assert len(polynomial_orbit([[5], [-2]], (-10, 10))) == 1


def test_polynomial_orbit_rejects_empty_coefficients():
    with pytest.raises(ValueError):
        polynomial_orbit([[]], (0, 3))


def test_squares_cover_limit():
    P = squares(10000)
    assert P.count_in(Box((0,), (10000,))) == 100
    assert P.generator is Generator.POLYNOMIAL
    assert 0 not in [p[0] for p in squares(100, start=1)]


def test_explicit_checks():
    with pytest.raises(ValueError):
        explicit([(1, 2), (3,)])
    with pytest.raises(ValueError):
        SparseSet(1, [(5,)], window=Box((0,), (5,)))
    P = explicit([(3,), (1,), (3,)])
    assert P.points.tolist() == [[1], [3]]


def test_window_is_authoritative():
    P = explicit([(1,)], window=Box((0,), (10,)))
    with pytest.raises(ValueError):
        P.count_in(Box((5,), (10,)))


def test_set_algebra():
    A, B = explicit([(1,), (2,)]), explicit([(2,), (3,)])
    assert A.union(B).as_set() == {(1,), (2,), (3,)}
    assert A.difference(B).as_set() == {(1,)}
    assert not A.isdisjoint(B)


# ---------------------------------------------------------------------------
# density
# ---------------------------------------------------------------------------

def test_density_evens():
    P = explicit([(x,) for x in range(0, 100, 2)])
    assert banach_density(P, Box((0,), (100,)), min_side=1) == Fraction(1)
    assert banach_density(P, Box((0,), (100,)), min_side=2) == Fraction(1, 2)


def test_density_squares_window_rate():
    P = squares(10000)
    W = Box((0,), (10000,))
    assert Fraction(P.count_in(W), W.size) == Fraction(1, 100)
    assert banach_density(P, W) >= Fraction(1, 100)


def test_density_empty():
    assert banach_density(explicit([], d=2), Box.cube(2, 16)) == 0
    with pytest.raises(ValueError):
        banach_density(explicit([], d=1), Box((0,), (0,)))


def brute_density(pts, shape, sides_per_axis, grid):
    best = Fraction(0)
    for side in itertools.product(*sides_per_axis):
        for corner in itertools.product(*(range(0, s - a + 1, grid) for s, a in zip(shape, side))):
            hits = sum(1 for p in pts if all(c <= x < c + a for x, c, a in zip(p, corner, side)))
            best = max(best, Fraction(hits, int(np.prod(side))))
    return best


@given(st.integers(1, 2), st.data())
def test_density_matches_brute_force(d, data):
    shape = tuple(data.draw(st.integers(1, 12)) for _ in range(d))
    pts = data.draw(st.lists(st.tuples(*(st.integers(0, s - 1) for s in shape)), max_size=15))
    grid = data.draw(st.integers(1, 3))
    min_side = data.draw(st.integers(1, 6))
    P = explicit(pts, d=d)
    ladders = [side_ladder(s, min_side) for s in shape]
    want = brute_density(set(pts), shape, ladders, grid)
    assert banach_density(P, Box((0,) * d, shape), grid, min_side) == want


@given(st.lists(st.integers(0, 63), max_size=20), st.lists(st.integers(0, 63), max_size=5), st.integers(1, 8))
def test_density_monotone_in_P(base, extra, min_side):
    W = Box((0,), (64,))
    P = explicit([(x,) for x in base], d=1)
    Q = P.union(explicit([(x,) for x in extra], d=1))
    assert banach_density(P, W, min_side=min_side) <= banach_density(Q, W, min_side=min_side)


@given(st.lists(st.integers(0, 63), max_size=20), st.integers(1, 64), st.integers(1, 64))
def test_density_antitone_in_cutoff(pts, a, b):
    W = Box((0,), (64,))
    P = explicit([(x,) for x in pts], d=1)
    lo, hi = sorted((a, b))
    assert banach_density(P, W, min_side=lo) >= banach_density(P, W, min_side=hi)


@pytest.mark.parametrize("P,d", [(squares(1 << 15), 1), (polynomial_orbit([[0, 1], [0, 0, 1]], (0, 200)), 2)])
def test_zero_density_sets_decrease_over_doublings(P, d):
    sides = [1 << j for j in range(10, 15)] if d == 1 else [1 << j for j in range(4, 9)]
    est = [banach_density(P, Box.cube(d, s)) for s in sides]
    assert all(a > b for a, b in zip(est, est[1:])), est


def test_density_certificate_on_skeleton():
    region = skeleton_mask(1, [16])  # free cell at 15
    P = explicit([(15,), (3,)], d=1)
    c = density_certificate(P, region, [(0,), (-12,)])
    assert c.hits == 1 and c.region_size == 16 and c.epsilon == Fraction(1, 16)
    c2 = density_certificate(explicit([(15,)], d=1), region, [(0,)])
    assert c2.hits == 0


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------

def test_point_file_round_trip(tmp_path):
    P = explicit([(1, -2), (0, 5), (7, 7)])
    path = tmp_path / "p.txt"
    path.write_text(format_sparse(P), encoding="utf-8")
    assert read_sparse(path).as_set() == P.as_set()


def test_polynomial_file_round_trip():
    P = polynomial_orbit([[1, 2], [0, 0, 3]], (-4, 9))
    back = parse_sparse(format_sparse(P))
    assert back.as_set() == P.as_set() and back.coeffs == P.coeffs and back.param_range == (-4, 9)


def test_parse_comments_and_errors():
    assert parse_sparse("# header\n3\n 4 # four\n").as_set() == {(3,), (4,)}
    with pytest.raises(ValueError):
        parse_sparse('{"format": 2, "polynomial": [[1]], "range": [0, 1]}')
    with pytest.raises(ValueError):
        parse_sparse("")
