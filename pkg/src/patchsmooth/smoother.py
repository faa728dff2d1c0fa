"""Block relaxation sweeps over a patch level.

Every block update solves its block exactly:

    u_b <- u_b + omega * Ainv_b (f_b - (A u)_b)

with the residual reading whatever u currently holds (ghosts included) and
Ainv_b the cached exact inverse for the block's shape.

Two schemes share that kernel.  block_jacobi stages all block results into
the v buffer and promotes them at once: the whole step reads one snapshot
of u, so any dispatch order and any worker count produce bit-identical
results.  chaotic_block_gs writes straight into u: under the serial
strategy that is exactly lexicographic block Gauss-Seidel, and under
parallel strategies concurrently processed blocks may observe each other's
pre- or post-update values in any mix (chaotic relaxation).  Cell values
are never torn: a cell either still has its old value or already has the
new one.

Ghost cells are refreshed once per full step, after all patches finish:
physical ghosts are re-extrapolated and interface ghosts re-exchanged, so
neighbour patches always couple through the previous step's values no
matter which scheme runs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .blocklinalg import matvec
from .grid import BlockRange, decompose_blocks, _int3
from .runtime import ExecutionStrategy, for_each_patch_block
from .stencil import Stencil7, block_residual

__all__ = [
    "SmootherConfig",
    "block_update",
    "smooth_jacobi_step",
    "smooth_chaotic_gs_step",
    "smooth",
    "residual_norm",
]

SCHEMES = ("block_jacobi", "chaotic_block_gs")

# Scheme-specific damping defaults, applied when omega is left unset.
_DEFAULT_OMEGA = {"block_jacobi": 0.8, "chaotic_block_gs": 1.0}


@dataclass(frozen=True)
class SmootherConfig:
    """What to run: scheme, block shape, damping, steps, dispatch."""

    scheme: str
    block_dims: tuple
    omega: float = None
    steps: int = 1
    strategy: ExecutionStrategy = field(default_factory=ExecutionStrategy.serial)
    stencil: Stencil7 = field(default_factory=Stencil7)
    # Seed for driver-built initial guesses; smoothing itself draws nothing.
    seed: int = 42

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, expected one of {SCHEMES}")
        object.__setattr__(self, "block_dims", _int3(self.block_dims, "block_dims"))
        if any(b < 1 for b in self.block_dims):
            raise ValueError(f"block_dims must be positive, got {self.block_dims}")
        omega = self.omega
        if omega is None:
            omega = _DEFAULT_OMEGA[self.scheme]
        omega = float(omega)
        if not 0.0 < omega <= 1.0:
            raise ValueError(f"omega must lie in (0, 1], got {omega}")
        object.__setattr__(self, "omega", omega)
        if not isinstance(self.steps, int) or isinstance(self.steps, bool) or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps!r}")
        if not isinstance(self.strategy, ExecutionStrategy):
            raise TypeError("strategy must be an ExecutionStrategy")
        if not isinstance(self.stencil, Stencil7):
            raise TypeError("stencil must be a Stencil7")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")


def block_update(u_b, r_b, inv, omega):
    """One exact block relaxation: u_b + omega * (inv @ r_b), new vector."""
    u_b = np.asarray(u_b, dtype=np.float64)
    return u_b + omega * matvec(inv, r_b)


def residual_norm(level, stencil):
    """Global L2 norm of f - A u over all patch interiors.

    Per-cell squares are accumulated with exactly rounded summation, so the
    value does not depend on patch order or on how cells are grouped into
    patches.  Ghost values are read as stored; refresh them first.
    """
    def terms():
        for p in level.patches:
            full = BlockRange((0, 0, 0), p.dims.shape)
            r = block_residual(stencil, p, full)
            yield from np.square(r).tolist()

    return math.sqrt(math.fsum(terms()))


class _Plan:
    """Per-patch block ranges with their cached inverses, built once."""

    __slots__ = ("decomps", "inverses")

    def __init__(self, level, config, cache):
        self.decomps = [
            decompose_blocks(p.dims, config.block_dims) for p in level.patches
        ]
        self.inverses = [
            [cache.get(config.stencil, r.extent) for r in d.ranges]
            for d in self.decomps
        ]


def _refresh_ghosts(level, timers):
    if timers is None:
        level.refresh_ghosts()
        return
    t0 = time.perf_counter()
    level.refresh_ghosts()
    timers["ghost_seconds"] = timers.get("ghost_seconds", 0.0) + (
        time.perf_counter() - t0
    )


def _jacobi_step(level, plan, config, timers=None):
    omega = config.omega
    stencil = config.stencil

    def work(pi, bi):
        patch = level.patches[pi]
        rng = plan.decomps[pi].ranges[bi]
        r = block_residual(stencil, patch, rng)
        u_b = np.ravel(patch.u[rng.slices(1)], order="F")
        new = block_update(u_b, r, plan.inverses[pi][bi], omega)
        patch.v[rng.slices(0)] = new.reshape(rng.extent, order="F")

    for_each_patch_block(level, plan.decomps, config.strategy, work)
    for p in level.patches:
        p.swap_buffers()
    _refresh_ghosts(level, timers)


def _gs_step(level, plan, config, timers=None):
    omega = config.omega
    stencil = config.stencil

    def work(pi, bi):
        patch = level.patches[pi]
        rng = plan.decomps[pi].ranges[bi]
        r = block_residual(stencil, patch, rng)
        u_b = np.ravel(patch.u[rng.slices(1)], order="F")
        new = block_update(u_b, r, plan.inverses[pi][bi], omega)
        patch.u[rng.slices(1)] = new.reshape(rng.extent, order="F")

    for_each_patch_block(level, plan.decomps, config.strategy, work)
    _refresh_ghosts(level, timers)


def smooth_jacobi_step(level, config, cache):
    """One damped block Jacobi step; expects ghosts already refreshed.

    All block results are staged into v from one snapshot of u, then the
    buffers swap roles and the ghost ring is refreshed.
    """
    if config.scheme != "block_jacobi":
        raise ValueError(f"config.scheme is {config.scheme!r}, not block_jacobi")
    _jacobi_step(level, _Plan(level, config, cache), config)
    return level


def smooth_chaotic_gs_step(level, config, cache):
    """One chaotic block Gauss-Seidel step; expects ghosts refreshed.

    Blocks update u in place as they complete.  Interface ghosts still only
    refresh at the end of the step, so cross-patch coupling stays one step
    behind regardless of dispatch.
    """
    if config.scheme != "chaotic_block_gs":
        raise ValueError(f"config.scheme is {config.scheme!r}, not chaotic_block_gs")
    _gs_step(level, _Plan(level, config, cache), config)
    return level


def smooth(level, config, cache, timers=None):
    """Run ``config.steps`` smoothing steps and record the residual history.

    Ghosts are refreshed before anything is measured, history[0] is the
    starting residual norm and history[k] the norm after step k, all with
    freshly exchanged ghosts.  When ``timers`` is a dict, the seconds spent
    in ghost refresh accumulate under the key "ghost_seconds".

    Returns (level, history); the level is updated in place.
    """
    plan = _Plan(level, config, cache)
    step = _jacobi_step if config.scheme == "block_jacobi" else _gs_step
    _refresh_ghosts(level, timers)
    history = [residual_norm(level, config.stencil)]
    for _ in range(config.steps):
        step(level, plan, config, timers)
        history.append(residual_norm(level, config.stencil))
    return level, history
