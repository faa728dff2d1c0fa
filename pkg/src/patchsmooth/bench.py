"""Timing harness: patch sets, wall-clock measurement, strong scaling.

Measurement protocol
--------------------
The timed region is the full ``smooth`` call, ghost refreshes included.
Block inverses are computed outside it: ``run_bench`` warms the cache for
every configuration before any clock starts and verifies afterwards that
the timed runs triggered no inversion at all.  Each configuration is run
``repeat`` times and the minimum wall time is reported, which is the
usual way to suppress scheduling noise on a shared machine.

Speedup is the classic strong-scaling ratio S(p) = T(1)/T(p) at a fixed
problem, and efficiency E(p) = S(p)/p.
"""

import os
import time
from dataclasses import dataclass

import numpy as np

from .blocklinalg import InverseCache
from .grid import Level, Patch, PatchDims, decompose_blocks, _int3
from .smoother import SmootherConfig, smooth

__all__ = [
    "MIXED_TABLE2_SIZES",
    "PatchSetSpec",
    "BenchRecord",
    "SpeedupRow",
    "build_level",
    "build_patch_set",
    "seed_initial_guess",
    "cells_smoothed",
    "warm_cache",
    "run_bench",
    "speedup_table",
]

_MAX_CELLS_ENV = "PATCHSMOOTH_MAX_CELLS"
_DEFAULT_MAX_CELLS = 300_000_000

# The mixed set: five cube sizes, sixteen patches each.
MIXED_TABLE2_SIZES = ((64, 64, 64), (72, 72, 72), (80, 80, 80), (88, 88, 88), (96, 96, 96))
_MIXED_COUNT_PER_SIZE = 16


@dataclass(frozen=True)
class PatchSetSpec:
    """A named collection of patch sizes, either uniform or the mixed set."""

    kind: str
    size: tuple = None
    count: int = 1

    def __post_init__(self):
        if self.kind not in ("uniform", "mixed"):
            raise ValueError(f"unknown patch set kind {self.kind!r}")
        if self.kind == "uniform":
            object.__setattr__(self, "size", _int3(self.size, "size"))
            if any(n < 1 for n in self.size):
                raise ValueError(f"patch size must be positive, got {self.size}")
            if not isinstance(self.count, int) or isinstance(self.count, bool) or self.count < 1:
                raise ValueError(f"count must be a positive integer, got {self.count!r}")

    @classmethod
    def uniform(cls, size, count=1):
        return cls(kind="uniform", size=size, count=count)

    @classmethod
    def mixed_table2(cls):
        return cls(kind="mixed", size=None, count=len(MIXED_TABLE2_SIZES) * _MIXED_COUNT_PER_SIZE)

    @property
    def sizes(self):
        """One interior-shape triple per patch, in layout order."""
        if self.kind == "uniform":
            return [self.size] * self.count
        out = []
        for size in MIXED_TABLE2_SIZES:
            out.extend([size] * _MIXED_COUNT_PER_SIZE)
        return out

    @property
    def label(self):
        """Comma-free identifier used in CSV output."""
        if self.kind == "mixed":
            return "mixed-table2"
        tag = "x".join(str(n) for n in self.size)
        return tag if self.count == 1 else f"{tag}-n{self.count}"


def _allocation_cap():
    raw = os.environ.get(_MAX_CELLS_ENV)
    if raw is None:
        return _DEFAULT_MAX_CELLS
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"{_MAX_CELLS_ENV} must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ValueError(f"{_MAX_CELLS_ENV} must be positive, got {cap}")
    return cap


def build_level(sizes, max_cells=None):
    """Lay out patches of the given interior sizes along the x axis.

    Patches abut end to end so neighbours share an interface and the
    ghost exchange does real work, as in a smoothing sweep over a row of
    an actual hierarchy.  Allocation is capped (two padded buffers plus
    the right-hand side per patch) at ``max_cells``, falling back to the
    PATCHSMOOTH_MAX_CELLS environment variable and then to 3e8 cells.
    """
    if max_cells is None:
        max_cells = _allocation_cap()
    dims = [PatchDims(*_int3(size, "patch size")) for size in sizes]
    if not dims:
        raise ValueError("no patch sizes given")
    need = sum(2 * d.total_cells + d.interior_cells for d in dims)
    if need > max_cells:
        raise ValueError(
            f"patch set needs {need} cells, cap is {max_cells} "
            f"(raise {_MAX_CELLS_ENV} to allow it)"
        )
    patches = []
    x0 = 0
    for d in dims:
        patches.append(Patch(d, origin=(x0, 0, 0)))
        x0 += d.nx
    return Level(patches)


def build_patch_set(spec, max_cells=None):
    """Materialize a PatchSetSpec as a Level of patches abutting along x."""
    if not isinstance(spec, PatchSetSpec):
        raise TypeError("spec must be a PatchSetSpec")
    return build_level(spec.sizes, max_cells)


def seed_initial_guess(level, seed):
    """Fill every patch interior from one generator; f stays zero."""
    rng = np.random.default_rng(seed)
    for p in level.patches:
        p.interior[...] = rng.random(p.dims.shape)
    return level


def cells_smoothed(level, steps):
    """Total cell updates: steps times the interior cells of the level."""
    if not isinstance(steps, int) or isinstance(steps, bool) or steps < 1:
        raise ValueError(f"steps must be a positive integer, got {steps!r}")
    return steps * level.interior_cells


def warm_cache(level, configs, cache):
    """Populate the inverse cache for every shape the configs will touch."""
    for config in configs:
        for p in level.patches:
            decomp = decompose_blocks(p.dims, config.block_dims)
            for extent in decomp.shapes:
                cache.get(config.stencil, extent)
    return cache


@dataclass(frozen=True)
class BenchRecord:
    """One timed configuration; wall time is the minimum over repeats."""

    patch_spec: str
    block_dims: tuple
    scheme: str
    strategy: str
    p: int
    q: int
    steps: int
    wall_seconds: float
    cells_smoothed: int
    cells_per_second: float
    ghost_seconds: float
    repeats: int


def _worker_counts(strategy):
    if strategy.kind == "serial":
        return 1, 1
    if strategy.kind == "patch_parallel":
        return strategy.patch_workers, 1
    if strategy.kind == "block_parallel":
        return 1, strategy.block_workers
    return strategy.patch_workers, strategy.block_workers


def run_bench(level, configs, cache=None, repeat=3, label="custom"):
    """Time each configuration on ``level``; returns one record per config.

    The cache is warmed for all configs up front, so the timed region
    performs zero inversions; a RuntimeError flags any violation.  The
    level is smoothed in place, run after run.  Dense relaxation does the
    same arithmetic whatever the field values are, so re-running on the
    already-smoothed level measures the same work.
    """
    configs = list(configs)
    for c in configs:
        if not isinstance(c, SmootherConfig):
            raise TypeError("configs must be SmootherConfig instances")
    if not isinstance(repeat, int) or isinstance(repeat, bool) or repeat < 1:
        raise ValueError(f"repeat must be a positive integer, got {repeat!r}")
    if cache is None:
        cache = InverseCache()
    warm_cache(level, configs, cache)
    records = []
    for config in configs:
        before = cache.inversions
        runs = []
        for _ in range(repeat):
            timers = {}
            t0 = time.perf_counter()
            smooth(level, config, cache, timers)
            wall = time.perf_counter() - t0
            runs.append((wall, timers.get("ghost_seconds", 0.0)))
        if cache.inversions != before:
            raise RuntimeError("inverse computed inside a timed region")
        wall, ghost = min(runs)
        updates = cells_smoothed(level, config.steps)
        p, q = _worker_counts(config.strategy)
        records.append(
            BenchRecord(
                patch_spec=label,
                block_dims=config.block_dims,
                scheme=config.scheme,
                strategy=config.strategy.kind,
                p=p,
                q=q,
                steps=config.steps,
                wall_seconds=wall,
                cells_smoothed=updates,
                cells_per_second=updates / wall,
                ghost_seconds=ghost,
                repeats=repeat,
            )
        )
    return records


@dataclass(frozen=True)
class SpeedupRow:
    workers: int
    speedup: float
    efficiency: float


def speedup_table(records):
    """Strong-scaling table from records of one problem at varying widths.

    All records must describe the same problem (patch set, blocks, scheme,
    steps).  The baseline is the first record with a single worker; its
    row is exactly S=1, E=1.
    """
    records = list(records)
    if not records:
        raise ValueError("no records")
    key = (records[0].patch_spec, records[0].block_dims, records[0].scheme, records[0].steps)
    for r in records:
        if (r.patch_spec, r.block_dims, r.scheme, r.steps) != key:
            raise ValueError("records mix problems; strong scaling needs a fixed problem")
    base = next((r for r in records if r.p * r.q == 1), None)
    if base is None:
        raise ValueError("no single-worker baseline record")
    rows = []
    for r in records:
        w = r.p * r.q
        s = 1.0 if r is base else base.wall_seconds / r.wall_seconds
        rows.append(SpeedupRow(workers=w, speedup=s, efficiency=s / w))
    return rows
