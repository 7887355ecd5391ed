"""Reference build schedules used by the test suite, the benchmarks and the CLI ``--preset`` flag."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .construction import Stage, StageParams, build_stages

SEED = 20240521


@dataclass(frozen=True)
class BuildConfig:
    name: str
    d: int
    params: tuple[StageParams, ...]

    def build(self, workers: int = 1) -> list[Stage]:
        return build_stages(self.d, self.params, workers=workers)


def _p(l, m, dk, target, budget, nu=Fraction(1, 10), seed=SEED) -> StageParams:
    return StageParams(l=l, m_next=m, d_tol=Fraction(dk), nu=nu, target=target, budget=budget, seed=seed)


# m schedule [1, 2, 6], l schedule [8, 6], d [1/2, 3/10], targets [40, 60]
REFERENCE_1D = BuildConfig(
    "reference-1d",
    1,
    (_p(8, 2, Fraction(1, 2), 40, 2000), _p(6, 6, Fraction(3, 10), 60, 2000)),
)

# the same schedule with l_2 = 4000, where about half of the second-step candidates pass
REFERENCE_1D_WIDE = BuildConfig(
    "reference-1d-wide",
    1,
    (_p(8, 2, Fraction(1, 2), 40, 2000), _p(4000, 6, Fraction(3, 10), 60, 400)),
)

REFERENCE_2D = BuildConfig("reference-2d", 2, (_p(4, 2, Fraction(1, 2), 25, 5000),))

PRESETS = {c.name: c for c in (REFERENCE_1D, REFERENCE_1D_WIDE, REFERENCE_2D)}
