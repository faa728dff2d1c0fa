"""Block relaxation smoothers for structured patch collections.

Block Jacobi and chaotic block Gauss-Seidel sweeps of the 3D 7-point
stencil over patches with ghost layers, with exact dense inversion of
the diagonal blocks, shape-keyed inverse caching, threaded execution
strategies, and convergence/benchmark harnesses.
"""

from .analysis import (
    DEFAULT_BLOCK_SIZES,
    DEFAULT_WINDOW,
    OracleResult,
    StudyReport,
    convergence_factor,
    relative_error,
    run_convergence_study,
    spectral_radius_oracle,
)
from .bench import (
    MIXED_TABLE2_SIZES,
    BenchRecord,
    PatchSetSpec,
    SpeedupRow,
    build_level,
    build_patch_set,
    cells_smoothed,
    run_bench,
    seed_initial_guess,
    speedup_table,
    warm_cache,
)
from .blocklinalg import (
    InverseCache,
    SingularMatrixError,
    invert_dense,
    matvec,
    multiply_back_error,
)
from .grid import (
    BlockDecomposition,
    BlockRange,
    InterfaceCopy,
    Level,
    Patch,
    PatchDims,
    block_cell,
    decompose_blocks,
    exchange_interface_ghosts,
    fill_physical_ghosts,
    ghost_overhead,
    global_index,
)
from .runtime import ExecutionStrategy, for_each_patch_block, partition_patches
from .smoother import (
    SCHEMES,
    SmootherConfig,
    block_update,
    residual_norm,
    smooth,
    smooth_chaotic_gs_step,
    smooth_jacobi_step,
)
from .stencil import (
    Stencil7,
    apply_stencil,
    assemble_block_matrix,
    assemble_patch_matrix,
    block_residual,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_BLOCK_SIZES",
    "DEFAULT_WINDOW",
    "MIXED_TABLE2_SIZES",
    "SCHEMES",
    "BenchRecord",
    "BlockDecomposition",
    "BlockRange",
    "ExecutionStrategy",
    "InterfaceCopy",
    "InverseCache",
    "Level",
    "OracleResult",
    "Patch",
    "PatchDims",
    "PatchSetSpec",
    "SingularMatrixError",
    "SmootherConfig",
    "SpeedupRow",
    "Stencil7",
    "StudyReport",
    "apply_stencil",
    "assemble_block_matrix",
    "assemble_patch_matrix",
    "block_cell",
    "block_residual",
    "block_update",
    "build_level",
    "build_patch_set",
    "cells_smoothed",
    "convergence_factor",
    "decompose_blocks",
    "exchange_interface_ghosts",
    "fill_physical_ghosts",
    "for_each_patch_block",
    "ghost_overhead",
    "global_index",
    "invert_dense",
    "matvec",
    "multiply_back_error",
    "partition_patches",
    "relative_error",
    "residual_norm",
    "run_bench",
    "run_convergence_study",
    "seed_initial_guess",
    "smooth",
    "smooth_chaotic_gs_step",
    "smooth_jacobi_step",
    "spectral_radius_oracle",
    "speedup_table",
    "warm_cache",
]
