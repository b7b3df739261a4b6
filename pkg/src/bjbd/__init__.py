"""Blind joint block diagonalization of matrix sets.

Given ``C_i ~= A Sigma_i A^T`` with block-diagonal ``Sigma_i``, recover the
rank ``p``, the finest block partition and the diagonalizer ``A``.
"""
__version__ = "0.1.0"

from .core import (BlockDiagonalization, MatrixSet, Partition, block_diag_part,
                   normalize_blocks, off_block_diag_part, offblock_residual,
                   partitions_equivalent, pinv, stack_underline)
from .diagnostics import (Comparison, IdentifiabilityReport, build_Gjj, build_Gjk,
                          compare_solutions, identifiability)
from .driver import solve_bjbdp
from .exceptions import (AmbiguousThresholdError, BJBDError, ConvergenceError,
                         DegenerateInputError, DimensionError, IllConditionedError,
                         NoReliableSplitError, PreconditionError, RankUndetectableError,
                         SplitUnstableError)
from .subspace import canonical_angles, estimate_rank, range_basis, spectral_profile
from .synth import gen_example1, gen_isa_covariances

__all__ = [
    "MatrixSet", "Partition", "BlockDiagonalization", "solve_bjbdp",
    "stack_underline", "block_diag_part", "off_block_diag_part", "partitions_equivalent",
    "pinv", "normalize_blocks", "offblock_residual",
    "spectral_profile", "estimate_rank", "range_basis", "canonical_angles",
    "identifiability", "compare_solutions", "build_Gjj", "build_Gjk",
    "IdentifiabilityReport", "Comparison",
    "gen_example1", "gen_isa_covariances",
    "BJBDError", "DimensionError", "DegenerateInputError", "PreconditionError",
    "RankUndetectableError", "AmbiguousThresholdError", "ConvergenceError",
    "NoReliableSplitError", "SplitUnstableError", "IllConditionedError",
]
