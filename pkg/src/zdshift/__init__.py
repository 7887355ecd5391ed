"""Finite-stage construction and exact verification of totally strictly ergodic Z^d subshifts."""
from ._kernels import BACKEND
from .lattice import Box, Sublattice, SubgroupSchedule, congruent, index, residues, schedule_cofinal
from .patterns import OccurrenceQuery, Pattern, PatternSet, flatten, frequency, occurrences, restrict, translate
from .construction import (
    FillRule,
    Stage,
    StageParams,
    StageReport,
    build_next,
    init_stage,
    phi,
    phi_inverse,
    read_stage,
    verify_stage_pair,
    write_stage,
)

__version__ = "0.1.0"
