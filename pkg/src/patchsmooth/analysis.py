"""Convergence measurement and the dense spectral reference.

The measured route runs the actual smoother and reads factors off the
residual history; the reference route assembles the dense error-propagation
matrix E = I - omega * M^{-1} A and estimates its spectral radius by power
iteration.  M mirrors exactly what the block sweeps apply: the block
diagonal of shape-keyed block matrices (Jacobi), plus the strict block
lower triangle of A for the lexicographic Gauss-Seidel sweep.  The two
routes share no linear algebra (the reference uses numpy's dense solver,
the smoother its own cached inverses), which is what makes the agreement
check meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocklinalg import InverseCache
from .grid import Level, Patch, PatchDims, decompose_blocks, _int3
from .runtime import ExecutionStrategy
from .smoother import SCHEMES, SmootherConfig, smooth
from .stencil import Stencil7, assemble_patch_matrix

__all__ = [
    "DEFAULT_BLOCK_SIZES",
    "DEFAULT_WINDOW",
    "StudyReport",
    "OracleResult",
    "relative_error",
    "convergence_factor",
    "spectral_radius_oracle",
    "run_convergence_study",
]

# Block shapes ordered by cell count, largest extent on x (the fast axis).
DEFAULT_BLOCK_SIZES = (
    (2, 2, 2),
    (4, 2, 2),
    (4, 4, 2),
    (4, 4, 4),
    (8, 4, 4),
    (8, 8, 4),
    (8, 8, 8),
)

# Sliding window (start, length) for desk-scale asymptotic factors.
DEFAULT_WINDOW = (400, 100)

# Dense spectral reference limits.
_MAX_ORACLE_CELLS = 4096
_POWER_TOL = 1e-8
_POWER_MAX_ITER = 50000


def relative_error(history, step):
    """||r_step|| / ||r_0|| from a residual history."""
    if not 0 <= step < len(history):
        raise ValueError(f"step {step} outside history of length {len(history)}")
    if history[0] <= 0.0:
        raise ValueError("zero initial residual, relative error undefined")
    return history[step] / history[0]


def convergence_factor(history, start, window):
    """Mean per-step residual reduction over [start, start + window].

    Computed as (||r_{start+window}|| / ||r_start||)^(1/window), which
    equals the geometric mean of the per-step ratios in the window.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if start < 0:
        raise ValueError(f"start must be >= 0, got {start}")
    if start + window >= len(history):
        raise ValueError(
            f"history has {len(history)} entries, window needs {start + window + 1}"
        )
    if history[start] <= 0.0:
        raise ValueError(f"residual at step {start} is not positive")
    return (history[start + window] / history[start]) ** (1.0 / window)


@dataclass(frozen=True)
class StudyReport:
    """One smoothing run: configuration, history, derived factors."""

    scheme: str
    patch_dims: tuple
    block_dims: tuple
    omega: float
    seed: int
    residual_history: tuple
    window: tuple = None
    asymptotic_factor: float = None
    window_ratio_min: float = None
    window_ratio_max: float = None

    @property
    def steps(self):
        return len(self.residual_history) - 1

    @property
    def relative_error_at(self):
        """Map step -> ||r_step||/||r_0|| for every recorded step."""
        return {
            k: relative_error(self.residual_history, k)
            for k in range(len(self.residual_history))
        }


@dataclass(frozen=True)
class OracleResult:
    """Power-iteration estimate of a spectral radius."""

    rho: float
    achieved_tol: float
    iterations: int
    converged: bool


def _sweep_matrix(stencil, dims, block_dims, scheme):
    """Dense M of the splitting the block sweep applies.

    Diagonal blocks are the closure-free shape matrices (in-block couplings
    only); for the Gauss-Seidel sweep the couplings into already-updated
    blocks (strictly lower lexicographic block index) join them.  The
    physical boundary closure belongs to A alone and never enters M.
    """
    decomp = decompose_blocks(dims, block_dims)
    nx, ny, nz = dims.shape
    m = dims.interior_cells
    mat = np.zeros((m, m), dtype=np.float64, order="F")
    offsets = ((-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1))
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                row = x + nx * (y + ny * z)
                own = decomp.block_of((x, y, z))
                mat[row, row] = stencil.center
                for c, (di, dj, dk) in zip(stencil.faces, offsets):
                    p, q, r = x + di, y + dj, z + dk
                    if not (0 <= p < nx and 0 <= q < ny and 0 <= r < nz):
                        continue
                    other = decomp.block_of((p, q, r))
                    if other == own or (scheme == "chaotic_block_gs" and other < own):
                        mat[row, p + nx * (q + ny * r)] = c
    return mat


def spectral_radius_oracle(patch_dims, block_dims, scheme, omega=None, stencil=None):
    """Spectral radius of I - omega * M^{-1} A for one configuration.

    Dense power iteration, capped at 4096 unknowns.  Returns an
    :class:`OracleResult`; ``converged`` is False when the relative change
    of the estimate never drops below 1e-8 within 50000 iterations, in
    which case ``rho`` is the last estimate.
    """
    if not isinstance(patch_dims, PatchDims):
        raise TypeError("patch_dims must be a PatchDims")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}, expected one of {SCHEMES}")
    if stencil is None:
        stencil = Stencil7()
    if omega is None:
        omega = 0.8 if scheme == "block_jacobi" else 1.0
    omega = float(omega)
    if not 0.0 < omega <= 1.0:
        raise ValueError(f"omega must lie in (0, 1], got {omega}")
    m = patch_dims.interior_cells
    if m > _MAX_ORACLE_CELLS:
        raise ValueError(
            f"patch has {m} cells, dense spectral reference capped at {_MAX_ORACLE_CELLS}"
        )
    a = assemble_patch_matrix(stencil, patch_dims)
    sweep = _sweep_matrix(stencil, patch_dims, block_dims, scheme)
    e_mat = -omega * np.linalg.solve(sweep, a)
    e_mat[np.diag_indices_from(e_mat)] += 1.0

    rng = np.random.default_rng(1905)
    v = rng.random(m) - 0.5
    v /= np.linalg.norm(v)
    prev = None
    achieved = float("inf")
    for it in range(1, _POWER_MAX_ITER + 1):
        w = e_mat @ v
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return OracleResult(rho=0.0, achieved_tol=0.0, iterations=it, converged=True)
        if prev is not None:
            achieved = abs(est - prev) / est
            if achieved < _POWER_TOL:
                return OracleResult(
                    rho=est, achieved_tol=achieved, iterations=it, converged=True
                )
        v = w / est
        prev = est
    return OracleResult(
        rho=prev, achieved_tol=achieved, iterations=_POWER_MAX_ITER, converged=False
    )


def run_convergence_study(
    patch_dims,
    block_sizes=DEFAULT_BLOCK_SIZES,
    schemes=SCHEMES,
    steps=3,
    seed=42,
    omega=None,
    strategy=None,
    window=DEFAULT_WINDOW,
    stencil=None,
):
    """Smooth f = 0 from a seeded random guess for every configuration.

    Every (scheme, block size) pair restarts from the identical initial
    guess (same seed, same generator), so reports are directly comparable.
    The asymptotic factor over ``window`` = (start, length) is attached
    when the history is long enough, together with the min and max
    per-step ratio inside the window (the chaotic scheme jitters, the
    deterministic ones do not).
    """
    if not isinstance(patch_dims, PatchDims):
        raise TypeError("patch_dims must be a PatchDims")
    if strategy is None:
        strategy = ExecutionStrategy.serial()
    if stencil is None:
        stencil = Stencil7()
    block_sizes = [_int3(b, "block size") for b in block_sizes]
    for s in schemes:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}, expected one of {SCHEMES}")
    cache = InverseCache()
    reports = []
    for scheme in schemes:
        for block in block_sizes:
            patch = Patch(patch_dims)
            rng = np.random.default_rng(seed)
            patch.interior[...] = rng.random(patch_dims.shape)
            level = Level([patch])
            config = SmootherConfig(
                scheme=scheme,
                block_dims=block,
                omega=omega,
                steps=steps,
                strategy=strategy,
                stencil=stencil,
            )
            _, history = smooth(level, config, cache)
            factor = ratio_min = ratio_max = None
            win = None
            if window is not None:
                start, length = window
                if start + length < len(history):
                    factor = convergence_factor(history, start, length)
                    ratios = [
                        history[t + 1] / history[t]
                        for t in range(start, start + length)
                    ]
                    ratio_min, ratio_max = min(ratios), max(ratios)
                    win = (start, length)
            reports.append(
                StudyReport(
                    scheme=scheme,
                    patch_dims=patch_dims.shape,
                    block_dims=tuple(block),
                    omega=config.omega,
                    seed=seed,
                    residual_history=tuple(history),
                    window=win,
                    asymptotic_factor=factor,
                    window_ratio_min=ratio_min,
                    window_ratio_max=ratio_max,
                )
            )
    return reports
