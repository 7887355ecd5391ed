import itertools
import math
from decimal import Decimal, getcontext
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import binomial_window_fraction
from zdshift.analysis import (
    CountMode,
    StageSummary,
    alpha_beta,
    boundary_correction,
    entropy_bounds,
    gap_series,
    lln_fraction,
    schedule_check,
)
from zdshift.construction import init_stage, with_patterns
from zdshift.lattice import Sublattice
from zdshift.patterns import Pattern

getcontext().prec = 80
LN2 = Decimal(2).ln()


def close(a: Decimal, b, tol="1e-40"):
    if isinstance(b, Fraction):
        b = Decimal(b.numerator) / Decimal(b.denominator)
    return abs(a - Decimal(b)) < Decimal(tol)


# ---------------------------------------------------------------------------
# entropy ledger
# ---------------------------------------------------------------------------

def test_stage1_entropy_is_log2():
    e = entropy_bounds([init_stage(1)]).entries[0]
    assert close(e.value, LN2) and e.lower <= LN2 <= e.upper


def test_full_shift_sanity():
    for n in (1, 5, 17, 40):
        e = entropy_bounds([StageSummary(k=1, d=1, n=n, count=2 ** n)]).entries[0]
        assert close(e.value, LN2)


def test_reference_stage2_value(wide1d):
    e = entropy_bounds(wide1d[:2]).entries[1]
    assert e.count == 40 and e.n == 17
    assert close(e.value, Decimal(40).ln() / 17)
    assert round(float(e.value), 3) == 0.217


def synthetic_counts(d, Ls, hyperplanes):
    """Stage summaries with |C_{k+1}| = |C_k|^(L^d) exactly; sides L n_k (+1 with hyperplanes)."""
    out = [StageSummary(k=1, d=d, n=1, count=2)]
    for L in Ls:
        prev = out[-1]
        out.append(StageSummary(k=prev.k + 1, d=d, n=L * prev.n + hyperplanes, count=prev.count ** (L ** d),
                                nu=Fraction(0), blocks_per_side=L))
    return out


@pytest.mark.parametrize("d,Ls", [(1, [4, 3, 2]), (2, [2, 2]), (3, [2])])
def test_lossless_synthetic_chain(d, Ls):
    ledger = entropy_bounds(synthetic_counts(d, Ls, 0))
    for e in ledger.entries:
        assert close(e.value, LN2) and close(e.target, LN2)
        assert e.lower <= LN2 <= e.upper
    for e in ledger.entries[1:]:
        assert close(e.effective_nu, 0)


@pytest.mark.parametrize("d,Ls", [(1, [4, 3, 2]), (2, [2, 2])])
def test_synthetic_chain_with_hyperplanes(d, Ls):
    # the inserted hyperplanes carry no information: value = log2|C_k| * log 2 / n_k^d
    stages = synthetic_counts(d, Ls, 1)
    for s, e in zip(stages, entropy_bounds(stages).entries):
        assert close(e.value, Decimal(s.count.bit_length() - 1) * LN2 / Decimal(s.n ** d))


def test_entropy_rejects_empty():
    with pytest.raises(ValueError):
        entropy_bounds([])


# ---------------------------------------------------------------------------
# schedule checks
# ---------------------------------------------------------------------------

def test_schedule_vii_and_viii_reference(wide1d):
    e = schedule_check(wide1d[:2])[0]
    assert e.vii  # 17/10 >= 1
    assert close(e.required_log2, Fraction(16) * Fraction(9, 10), "1e-40")
    assert e.achieved == 40 and not e.viii


def test_schedule_vii_false_for_zero_nu():
    s = [StageSummary(1, 1, 1, 2), StageSummary(2, 1, 10 ** 6 + 1, 4, nu=Fraction(0), blocks_per_side=10 ** 6)]
    assert not schedule_check(s)[0].vii


def test_schedule_viii_exact_boundary():
    s = [StageSummary(1, 1, 1, 2), StageSummary(2, 1, 5, 2 ** 2, nu=Fraction(1, 2), blocks_per_side=4)]
    e = schedule_check(s)[0]
    assert e.viii  # 4 >= 2^(4 * 1/2)
    s[1] = StageSummary(2, 1, 5, 3, nu=Fraction(1, 2), blocks_per_side=4)
    assert not schedule_check(s)[0].viii


# ---------------------------------------------------------------------------
# alpha, beta and gaps
# ---------------------------------------------------------------------------

def test_alpha_beta_stage1():
    assert alpha_beta(init_stage(1), Pattern.from_string("1"), Sublattice(1, 1)) == (0, 1)


def test_alpha_beta_singleton_whole_word(wide1d):
    s = with_patterns(wide1d[1], wide1d[1].array()[:1])
    b = Pattern(s.array()[0])
    assert alpha_beta(s, b, Sublattice(1, 1)) == (Fraction(1, 17), Fraction(1, 17))


def test_alpha_beta_too_large(wide1d):
    with pytest.raises(ValueError):
        alpha_beta(wide1d[1], Pattern(np.zeros(18, dtype=np.uint8)), Sublattice(1, 1))


def test_alpha_beta_reference_by_brute_force(wide1d):
    s = wide1d[1]
    a, b = alpha_beta(s, Pattern.from_string("1"), Sublattice(1, 2))
    per = [[sum(int(W[g]) for g in range(r, 17, 2)) for r in (0, 1)] for W in s.array()]
    assert (a, b) == (Fraction(min(map(min, per)), 17), Fraction(max(map(max, per)), 17))


def test_gap_reference(wide1d):
    rep = gap_series(wide1d, Pattern.from_string("1"), Sublattice(1, 1))
    g = rep.gaps()
    assert g[0] == 1
    assert g[2] < g[1]
    for e in rep.entries[1:]:
        assert e.alpha <= e.beta and not e.flagged
        assert e.bound == 2 * wide1d[e.k - 1].last_params.d_tol
    assert rep.entries[1].gap <= rep.entries[1].bound + rep.entries[1].correction


def test_gap_singleton_stages_are_zero(wide1d):
    singles = [with_patterns(s, s.array()[:1]) for s in wide1d[1:]]
    rep = gap_series(singles, Pattern.from_string("1"), Sublattice(1, 1))
    assert rep.gaps() == [0, 0]


def test_boundary_correction_examples():
    assert boundary_correction(17, 1, 16, 1, 1) == Fraction(2, 17)
    assert boundary_correction(5, 1, 4, 1, 2) == Fraction(25 - 9, 25)
    assert boundary_correction(17, 1, 16, 2, 1) == Fraction(16, 17)


# ---------------------------------------------------------------------------
# law of large numbers
# ---------------------------------------------------------------------------

def test_lln_reference_value():
    v = lln_fraction(20, Fraction(1, 10), Sublattice(1, 1))
    assert v == Fraction(520676, 1048576)
    assert v == binomial_window_fraction(20, 9, 11)


def test_lln_trivial_ends():
    assert lln_fraction(6, 1, Sublattice(1, 1)) == 1
    assert lln_fraction(3, 0, Sublattice(1, 1)) == 0
    assert lln_fraction(2, 2, Sublattice(2, 2)) == 1


def test_lln_cap():
    with pytest.raises(ValueError):
        lln_fraction(25, Fraction(1, 10), Sublattice(1, 1))


def brute_lln(n, eps, d, m, c):
    cells = list(itertools.product(range(n), repeat=d))
    R = m ** d
    target = Fraction(1, c * R)
    res = [sum(x % m * m ** (d - 1 - i) for i, x in enumerate(g)) for g in cells]
    good = 0
    for w in itertools.product(range(c), repeat=len(cells)):
        ok = True
        for sym in range(c):
            for r in range(R):
                cnt = sum(1 for s, rr in zip(w, res) if s == sym and rr == r)
                if not abs(Fraction(cnt, len(cells)) - target) < eps:
                    ok = False
        good += ok
    return Fraction(good, c ** len(cells))


@pytest.mark.parametrize("n,eps,d,m,c", [(6, Fraction(1, 6), 1, 2, 2), (2, Fraction(1, 4), 2, 1, 2),
                                         (5, Fraction(1, 5), 1, 1, 3), (3, Fraction(1, 9), 2, 1, 2)])
def test_lln_matches_brute_force(n, eps, d, m, c):
    assert lln_fraction(n, eps, Sublattice(d, m), c) == brute_lln(n, eps, d, m, c)


@given(st.integers(1, 14), st.fractions(0, 1), st.fractions(0, 1), st.integers(1, 2))
def test_lln_monotone_in_eps(n, e1, e2, m):
    lo, hi = sorted((e1, e2))
    F = Sublattice(1, m)
    assert lln_fraction(n, lo, F) <= lln_fraction(n, hi, F)


def test_lln_monotone_in_n():
    vals = [lln_fraction(n, Fraction(1, 4), Sublattice(1, 1)) for n in (8, 12, 16, 20)]
    assert vals == sorted(vals) and vals[-1] < 1


def test_montecarlo_agrees_with_exhaustive():
    F = Sublattice(1, 2)
    exact = lln_fraction(16, Fraction(1, 8), F)
    est = lln_fraction(16, Fraction(1, 8), F, mode=CountMode.MONTECARLO, trials=20000, seed=5)
    assert abs(est.value - float(exact)) <= 3 * est.stderr
    again = lln_fraction(16, Fraction(1, 8), F, mode="MONTECARLO", trials=20000, seed=5)
    assert again == est
    assert math.isclose(est.stderr, math.sqrt(est.value * (1 - est.value) / 20000))
