"""Entropy accounting, alpha/beta frequency-gap diagnostics and exact counting of typical words."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _kernels
from .lattice import Sublattice, index, residue_grid
from .patterns import Pattern

PRECISION = 60


@dataclass(frozen=True)
class StageSummary:
    """Minimal description of a stage for entropy bookkeeping (also used for synthetic counts).

    ``nu`` and ``blocks_per_side`` describe the step that produced this stage.
    """

    k: int
    d: int
    n: int
    count: int
    nu: Fraction | None = None
    blocks_per_side: int | None = None


def summarize(stage) -> StageSummary:
    if isinstance(stage, StageSummary):
        return stage
    p = stage.last_params
    return StageSummary(
        k=stage.k,
        d=stage.d,
        n=stage.n,
        count=len(stage.patterns),
        nu=p.nu if p else None,
        blocks_per_side=p.blocks_per_side if p else None,
    )


def _ln(x: int | Fraction) -> Decimal:
    x = Fraction(x)
    return Decimal(x.numerator).ln() - Decimal(x.denominator).ln()


@dataclass(frozen=True)
class EntropyEntry:
    k: int
    n: int
    count: int
    nu: Fraction | None
    value: Decimal
    lower: Decimal
    upper: Decimal
    target: Decimal
    effective_nu: Decimal | None

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n": self.n,
            "count": self.count,
            "nu": str(self.nu) if self.nu is not None else None,
            "value": str(self.value),
            "bounds": [str(self.lower), str(self.upper)],
            "target": str(self.target),
            "effective_nu": str(self.effective_nu) if self.effective_nu is not None else None,
        }


@dataclass(frozen=True)
class EntropyLedger:
    entries: tuple[EntropyEntry, ...]
    precision: int = PRECISION

    def values(self) -> list[Decimal]:
        return [e.value for e in self.entries]

    def to_dict(self) -> dict:
        return {"format": 1, "precision": self.precision, "entries": [e.to_dict() for e in self.entries]}


def entropy_bounds(stages: Sequence, precision: int = PRECISION) -> EntropyLedger:
    """log|C_k| / n_k^d per stage, with a rigorous +-bound pair at ``precision`` digits.

    ``effective_nu`` solves |C_k| = |C_{k-1}|^(L^d (1 - nu')), taking L from the
    stage metadata (defaults to (n_k - 1) / n_{k-1}).
    """
    if not stages:
        raise ValueError("no stages")
    sums = [summarize(s) for s in stages]
    entries = []
    with localcontext() as ctx:
        ctx.prec = precision + 10
        ln2 = Decimal(2).ln()
        prod = Decimal(1)
        for i, s in enumerate(sums):
            if s.count < 1:
                raise ValueError(f"stage {s.k} is empty")
            value = _ln(s.count) / Decimal(s.n ** s.d)
            # two correctly rounded operations: relative error below 10^(1-prec) each
            err = abs(value) * Decimal(10) ** (2 - ctx.prec) + Decimal(10) ** (-ctx.prec)
            eff = None
            if i > 0:
                if s.nu is not None:
                    prod *= (1 - Decimal(s.nu.numerator) / Decimal(s.nu.denominator)) ** (s.d + 1)
                prev = sums[i - 1]
                L = s.blocks_per_side or (s.n - 1) // prev.n
                if prev.count > 1:
                    eff = 1 - _ln(s.count) / (Decimal(L ** s.d) * _ln(prev.count))
            entries.append(
                EntropyEntry(
                    k=s.k, n=s.n, count=s.count, nu=s.nu,
                    value=+value, lower=value - err, upper=value + err,
                    target=prod * ln2, effective_nu=eff,
                )
            )
    return EntropyLedger(tuple(entries), precision)


@dataclass(frozen=True)
class ScheduleEntry:
    k: int
    nu: Fraction
    n_next: int
    vii: bool
    required_log2: Decimal
    achieved: int
    viii: bool

    def to_dict(self) -> dict:
        return {
            "k": self.k, "nu": str(self.nu), "n_next": self.n_next, "vii": self.vii,
            "viii_required_log2": str(self.required_log2), "viii_achieved": self.achieved, "viii": self.viii,
        }


def _viii_holds(achieved: int, prev: int, exponent: Fraction) -> bool:
    # achieved >= prev^(p/q)  <=>  achieved^q >= prev^p, exact when the numbers stay small
    p, q = exponent.numerator, exponent.denominator
    if p * prev.bit_length() <= 1 << 20:
        return achieved ** q >= prev ** p
    with localcontext() as ctx:
        ctx.prec = PRECISION
        return Decimal(q) * _ln(achieved) >= Decimal(p) * _ln(prev)


def schedule_check(stages: Sequence) -> list[ScheduleEntry]:
    """Conditions (vii) nu_k * n_{k+1} >= 1 and (viii) on the achieved counts (informational)."""
    sums = [summarize(s) for s in stages]
    out = []
    for prev, cur in zip(sums, sums[1:]):
        if cur.nu is None:
            raise ValueError(f"stage {cur.k} carries no nu")
        L = cur.blocks_per_side or (cur.n - 1) // prev.n
        exponent = Fraction(L ** cur.d) * (1 - cur.nu)
        with localcontext() as ctx:
            ctx.prec = PRECISION
            req = Decimal(exponent.numerator) / Decimal(exponent.denominator) * _ln(prev.count) / Decimal(2).ln()
        out.append(
            ScheduleEntry(
                k=prev.k, nu=cur.nu, n_next=cur.n, vii=cur.nu * cur.n >= 1,
                required_log2=req, achieved=cur.count, viii=_viii_holds(cur.count, prev.count, exponent),
            )
        )
    return out


# ---------------------------------------------------------------------------
# alpha / beta
# ---------------------------------------------------------------------------

def _class_occurrences(W: np.ndarray, b: np.ndarray, m: int) -> np.ndarray:
    """Occurrence counts of b in W per residue class (lexicographic) of the placement corner."""
    mask = _kernels.match_mask(W, b)
    d = W.ndim
    return np.array([int(mask[tuple(slice(x, None, m) for x in r)].sum()) for r in np.ndindex(*(m,) * d)],
                    dtype=np.int64)


def alpha_beta(stage, b_A: Pattern, F: Sublattice) -> tuple[Fraction, Fraction]:
    """min / max over W in C_k and residues g of fr(b_A, W, (g, F))."""
    if b_A.alphabet != 2:
        raise ValueError("b_A must be binary")
    if b_A.d != stage.d or F.d != stage.d:
        raise ValueError("dimension mismatch")
    if any(s > stage.n for s in b_A.values.shape):
        raise ValueError("b_A is larger than the stage support")
    b = np.asarray(b_A.values)
    lo = hi = None
    for W in stage.patterns.array:
        c = _class_occurrences(np.asarray(W), b, F.m)
        lo = int(c.min()) if lo is None else min(lo, int(c.min()))
        hi = int(c.max()) if hi is None else max(hi, int(c.max()))
    size = stage.n ** stage.d
    return Fraction(lo, size), Fraction(hi, size)


@dataclass(frozen=True)
class GapEntry:
    k: int
    alpha: Fraction
    beta: Fraction
    bound: Fraction | None
    correction: Fraction | None
    flagged: bool

    @property
    def gap(self) -> Fraction:
        return self.beta - self.alpha

    def to_dict(self) -> dict:
        s = lambda x: str(x) if x is not None else None
        return {"k": self.k, "alpha": s(self.alpha), "beta": s(self.beta), "gap": s(self.gap),
                "bound": s(self.bound), "correction": s(self.correction), "flagged": self.flagged}


@dataclass(frozen=True)
class GapReport:
    entries: tuple[GapEntry, ...]

    def gaps(self) -> list[Fraction]:
        return [e.gap for e in self.entries]

    def to_dict(self) -> dict:
        return {"format": 1, "entries": [e.to_dict() for e in self.entries]}


def boundary_correction(n_k: int, n_prev: int, blocks_per_side: int, side: int, d: int) -> Fraction:
    """Share of placements of a side-``side`` cube in A_k not inside one controlled lower block.

    Controlled blocks are the (L-1)^d blocks of [0, L-1)^d; every other placement either
    straddles a block boundary or touches the last block row or the inserted hyperplanes.
    """
    total = max(0, n_k - side + 1) ** d
    inside = ((blocks_per_side - 1) * max(0, n_prev - side + 1)) ** d
    return Fraction(total - inside, n_k ** d)


def gap_series(stages: Sequence, b_A: Pattern, F: Sublattice) -> GapReport:
    """alpha_k, beta_k per stage, with the reference bound 2*d_{k-1} plus the boundary correction."""
    if len(stages) < 2:
        raise ValueError("need at least two stages")
    if not b_A.support.is_cube:
        raise ValueError("b_A must live on a cube")
    side = b_A.support.side
    entries = []
    for i, s in enumerate(stages):
        a, b = alpha_beta(s, b_A, F)
        if i == 0:
            entries.append(GapEntry(s.k, a, b, None, None, False))
            continue
        p = s.last_params
        bound = 2 * p.d_tol
        corr = boundary_correction(s.n, stages[i - 1].n, p.blocks_per_side, side, s.d)
        entries.append(GapEntry(s.k, a, b, bound, corr, (b - a) > bound + corr))
    return GapReport(tuple(entries))


# ---------------------------------------------------------------------------
# law of large numbers
# ---------------------------------------------------------------------------

class CountMode(str, enum.Enum):
    EXHAUSTIVE = "EXHAUSTIVE"
    MONTECARLO = "MONTECARLO"


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    trials: int


EXHAUSTIVE_CAP = 1 << 24


def typical_count_bounds(N: int, eps: Fraction, c: int, R: int) -> tuple[int, int]:
    """Integer counts x with |x/N - 1/(c R)| < eps (strict)."""
    t = Fraction(1, c * R)
    lo = math.floor(N * (t - eps)) + 1
    hi = math.ceil(N * (t + eps)) - 1
    return lo, hi


def lln_fraction(
    n: int,
    eps,
    F: Sublattice,
    c: int = 2,
    mode: CountMode | str = CountMode.EXHAUSTIVE,
    trials: int = 10000,
    seed: int = 0,
) -> Fraction | Estimate:
    """Fraction of words on [0,n)^d over c symbols whose every residue-class frequency is eps-close to 1/(c*index(F))."""
    eps = Fraction(eps)
    d = F.d
    N = n ** d
    R = index(F)
    lo, hi = typical_count_bounds(N, eps, c, R)
    res = residue_grid((n,) * d, F.m).ravel()
    mode = CountMode(mode)
    if mode is CountMode.EXHAUSTIVE:
        if c ** N > EXHAUSTIVE_CAP:
            raise ValueError(f"{c}^{N} words exceed the exhaustive cap 2^24")
        if lo > hi:
            return Fraction(0)
        return Fraction(_kernels.count_words_in_bounds(N, c, res, R, lo, hi), c ** N)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & ((1 << 64) - 1))))
    onehot = np.zeros((N, R), dtype=np.int64)
    onehot[np.arange(N), res] = 1
    good = 0
    chunk = max(1, min(trials, (1 << 22) // max(N, 1)))
    done = 0
    while done < trials:
        t = min(chunk, trials - done)
        words = rng.integers(0, c, size=(t, N))
        ok = np.ones(t, dtype=np.bool_)
        for sym in range(c):
            cnt = (words == sym).astype(np.int64) @ onehot
            ok &= np.all((cnt >= lo) & (cnt <= hi), axis=1)
        good += int(ok.sum())
        done += t
    p = good / trials
    return Estimate(p, math.sqrt(max(p * (1 - p), 0.0) / trials), trials)
