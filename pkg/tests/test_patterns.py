from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from oracles import naive_occurrences
from zdshift.lattice import Box, Sublattice, residues
from zdshift.patterns import (
    AlphabetError,
    OccurrenceQuery,
    Pattern,
    PatternSet,
    flatten,
    format_pattern,
    frequency,
    occurrence_count,
    occurrences,
    parse_pattern,
    restrict,
    translate,
)


def test_restrict_examples():
    b = Pattern.from_string("0110")
    assert restrict(b, Box((1,), (2,))).to_string() == "11"
    assert restrict(b, b.support) == b
    q = Pattern.from_rows(["10", "01"])
    assert restrict(q, Box.cube(2, 1)).to_string() == "1"
    with pytest.raises(ValueError):
        restrict(b, Box((3,), (2,)))


def test_translate_examples():
    b = Pattern.from_string("0110")
    t = translate(b, (3,))
    assert t.support == Box((3,), (4,)) and t.to_string() == "0110"
    assert translate(b, (0,)) == b
    q = translate(Pattern.from_rows(["10", "01"]), (-1, 2))
    assert q.support == Box((-1, 2), (2, 2))


def test_occurrence_examples():
    one = Pattern.from_string("1")
    b2 = Pattern.from_string("0110")
    assert occurrences(one, b2) == [(1,), (2,)]
    assert occurrences(one, b2, OccurrenceQuery((0,), Sublattice(1, 2))) == [(2,)]
    z2 = Pattern(np.zeros((2, 2)))
    z3 = Pattern(np.zeros((3, 3)))
    assert occurrences(z2, z3) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_frequency_examples():
    assert frequency(Pattern.from_string("11"), Pattern.from_string("0110")) == Fraction(1, 4)
    grid = Pattern.from_rows(["101", "010", "101"])
    one = Pattern(np.ones((1, 1)))
    assert frequency(one, grid) == Fraction(5, 9)
    assert frequency(one, grid, OccurrenceQuery((0, 0), Sublattice(2, 2))) == Fraction(4, 9)


def test_alphabet_mismatch():
    with pytest.raises(AlphabetError):
        occurrences(Pattern.from_string("1", alphabet=3), Pattern.from_string("0110"))
    with pytest.raises(AlphabetError):
        Pattern.from_string("012")


def test_frequency_empty_support():
    with pytest.raises(ValueError):
        frequency(Pattern.from_string("1"), Pattern(np.zeros(0, dtype=np.uint8)))


def test_flatten_examples():
    blocks = PatternSet([Pattern.from_string("0"), Pattern.from_string("1")])
    w = Pattern(np.array([1, 0, 1]), alphabet=2)
    assert flatten(w, blocks).to_string() == "101"
    ab = PatternSet([Pattern.from_string("01"), Pattern.from_string("10")])
    assert flatten(Pattern(np.array([0, 1])), ab).to_string() == "0110"
    with pytest.raises(AlphabetError):
        flatten(Pattern(np.array([0, 1]), alphabet=3), ab)


def test_patternset_rejects_duplicates():
    with pytest.raises(ValueError):
        PatternSet([Pattern.from_string("01"), Pattern.from_string("01")])


def test_text_round_trip():
    b = Pattern.from_rows(["100", "011", "111"], corner=(-1, 4))
    assert parse_pattern(format_pattern(b)) == b
    assert format_pattern(b).splitlines()[0] == "2 3 2 -1 4"


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

@st.composite
def pair_instances(draw, max_side=12):
    d = draw(st.integers(1, 2))
    n2 = draw(st.integers(1, max_side))
    n1 = draw(st.integers(1, min(n2, 3)))
    c = draw(st.integers(2, 3))
    b2 = draw(hnp.arrays(np.uint8, (n2,) * d, elements=st.integers(0, c - 1)))
    b1 = draw(hnp.arrays(np.uint8, (n1,) * d, elements=st.integers(0, c - 1)))
    c1 = tuple(draw(st.lists(st.integers(-5, 5), min_size=d, max_size=d)))
    c2 = tuple(draw(st.lists(st.integers(-5, 5), min_size=d, max_size=d)))
    m = draw(st.integers(1, 4))
    return Pattern(b1, c1, c), Pattern(b2, c2, c), Sublattice(d, m)


@given(pair_instances())
def test_residue_decomposition(inst):
    b1, b2, F = inst
    total = sum(frequency(b1, b2, OccurrenceQuery(r, F)) for r in residues(F))
    assert frequency(b1, b2) == total


@given(pair_instances(), st.booleans())
def test_occurrences_match_naive_scan(inst, use_query):
    b1, b2, F = inst
    q = OccurrenceQuery(tuple(range(F.d)), F) if use_query else None
    want = naive_occurrences(
        b1.values, b1.corner, b2.values, b2.corner, F.m if use_query else None, q.h if q else None
    )
    assert occurrences(b1, b2, q) == want
    assert occurrence_count(b1, b2, q) == len(want)


@given(st.data())
def test_restrict_composition(data):
    d = data.draw(st.integers(1, 2))
    n = data.draw(st.integers(1, 8))
    b = Pattern(data.draw(hnp.arrays(np.uint8, (n,) * d, elements=st.integers(0, 1))))

    def sub_box(outer: Box) -> Box:
        lo = [data.draw(st.integers(c, c + s)) for c, s in zip(outer.corner, outer.shape)]
        hi = [data.draw(st.integers(l, c + s)) for l, c, s in zip(lo, outer.corner, outer.shape)]
        return Box(tuple(lo), tuple(h - l for l, h in zip(lo, hi)))

    A2 = sub_box(b.support)
    A1 = sub_box(A2)
    assert restrict(restrict(b, A2), A1) == restrict(b, A1)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=20), st.integers(-50, 50))
def test_translate_inverse(vals, g):
    b = Pattern(np.array(vals))
    assert translate(translate(b, (g,)), (-g,)) == b


@given(st.data())
def test_flatten_transport_on_block_grid(data):
    """Block-aligned occurrences of a block in flatten(w) are exactly n_k times those of its symbol in w."""
    d = data.draw(st.integers(1, 2))
    n_k = data.draw(st.integers(1, 3))
    cells = n_k ** d
    K = data.draw(st.integers(2, min(4, 2 ** cells)))
    codes = data.draw(st.lists(st.integers(0, 2 ** cells - 1), min_size=K, max_size=K, unique=True))
    L = data.draw(st.integers(1, 5))
    bits = (np.array(codes)[:, None] >> np.arange(cells)) & 1
    stack = bits.astype(np.uint8).reshape((K,) + (n_k,) * d)
    blocks = PatternSet(stack)
    w = Pattern(data.draw(hnp.arrays(np.uint8, (L,) * d, elements=st.integers(0, K - 1))), alphabet=K)
    W = flatten(w, blocks)
    for c in range(K):
        sym = Pattern(np.full((1,) * d, c, dtype=np.uint8), alphabet=K)
        in_w = occurrences(sym, w)
        in_W = occurrences(blocks[c], W)
        aligned = {g for g in in_W if all(x % n_k == 0 for x in g)}
        assert aligned == {tuple(n_k * x for x in g) for g in in_w}


@given(st.data())
def test_frequency_perturbation_bound(data):
    n = data.draw(st.integers(1, 40))
    vals = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)), dtype=np.uint8)
    eps = Fraction(data.draw(st.integers(0, n)), n)
    k = int(eps * n)
    idx = data.draw(st.lists(st.integers(0, n - 1), max_size=k, unique=True))
    changed = vals.copy()
    for i in idx:
        changed[i] ^= 1
    m = data.draw(st.integers(1, 3))
    q = OccurrenceQuery((data.draw(st.integers(0, m - 1)),), Sublattice(1, m))
    for c in (0, 1):
        cell = Pattern(np.array([c], dtype=np.uint8))
        diff = abs(frequency(cell, Pattern(vals), q) - frequency(cell, Pattern(changed), q))
        assert diff <= eps
