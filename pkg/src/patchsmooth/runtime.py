"""Work dispatch over (patch, block) pairs.

Four strategies run the same task set:

* serial: one thread, patches in index order, blocks lexicographic.
* patch_parallel(p): whole patches are assigned to p workers.
* block_parallel(q): the flattened block list is cut into q contiguous
  chunks, one worker each.
* two_level(p, q): p patch workers, each fanning its patches' blocks out
  to q block workers.

Every task runs exactly once under every strategy.  Workers with a single
thread preserve the serial order: assignments keep patch indices ascending
within a worker, so ``patch_parallel(1)``, ``block_parallel(1)`` and
``two_level(1, 1)`` all reproduce the serial schedule exactly.

Patch-to-worker assignment is greedy by default (largest patch first onto
the least loaded worker); round_robin and in_order (contiguous ranges) stay
available for comparison runs.
"""

from __future__ import annotations

import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

__all__ = [
    "ExecutionStrategy",
    "partition_patches",
    "for_each_patch_block",
]

_KINDS = ("serial", "patch_parallel", "block_parallel", "two_level")
_ASSIGNMENTS = ("greedy", "round_robin", "in_order")


@dataclass(frozen=True)
class ExecutionStrategy:
    """How (patch, block) tasks map onto workers."""

    kind: str = "serial"
    patch_workers: int = 1
    block_workers: int = 1
    assignment: str = "greedy"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        for name, w in (
            ("patch_workers", self.patch_workers),
            ("block_workers", self.block_workers),
        ):
            if not isinstance(w, int) or isinstance(w, bool) or w < 1:
                raise ValueError(f"{name} must be a positive integer, got {w!r}")
        if self.assignment not in _ASSIGNMENTS:
            raise ValueError(f"unknown assignment {self.assignment!r}")

    @classmethod
    def serial(cls):
        return cls(kind="serial")

    @classmethod
    def patch_parallel(cls, workers, assignment="greedy"):
        return cls(kind="patch_parallel", patch_workers=workers, assignment=assignment)

    @classmethod
    def block_parallel(cls, workers):
        return cls(kind="block_parallel", block_workers=workers)

    @classmethod
    def two_level(cls, patch_workers, block_workers, assignment="greedy"):
        return cls(
            kind="two_level",
            patch_workers=patch_workers,
            block_workers=block_workers,
            assignment=assignment,
        )

    @property
    def width(self):
        """Total worker count: 1, p, q, or p*q depending on the kind."""
        if self.kind == "serial":
            return 1
        if self.kind == "patch_parallel":
            return self.patch_workers
        if self.kind == "block_parallel":
            return self.block_workers
        return self.patch_workers * self.block_workers


def partition_patches(level, workers, method="greedy"):
    """Assign patch indices to ``workers`` buckets.

    greedy places the largest remaining patch on the least loaded worker
    (load = interior cells), round_robin cycles indices, in_order cuts the
    index list into contiguous ranges.  Buckets keep their patch indices
    ascending so a single worker reproduces the serial patch order.
    """
    if not isinstance(workers, int) or isinstance(workers, bool) or workers < 1:
        raise ValueError(f"workers must be a positive integer, got {workers!r}")
    if method not in _ASSIGNMENTS:
        raise ValueError(f"unknown assignment {method!r}")
    n = len(level.patches)
    buckets = [[] for _ in range(workers)]
    if method == "round_robin":
        for i in range(n):
            buckets[i % workers].append(i)
        return buckets
    if method == "in_order":
        base, extra = divmod(n, workers)
        start = 0
        for w in range(workers):
            size = base + (1 if w < extra else 0)
            buckets[w].extend(range(start, start + size))
            start += size
        return buckets
    # greedy: sort descending by cells (stable, so ties keep index order),
    # then always feed the least loaded worker, lowest index winning ties.
    order = sorted(
        range(n), key=lambda i: -level.patches[i].dims.interior_cells
    )
    heap = [(0, w) for w in range(workers)]
    heapq.heapify(heap)
    for i in order:
        load, w = heapq.heappop(heap)
        buckets[w].append(i)
        heapq.heappush(heap, (load + level.patches[i].dims.interior_cells, w))
    for b in buckets:
        b.sort()
    return buckets


def _chunks(seq, k):
    """k contiguous near-equal pieces, earlier pieces one element longer."""
    base, extra = divmod(len(seq), k)
    out = []
    start = 0
    for w in range(k):
        size = base + (1 if w < extra else 0)
        out.append(seq[start : start + size])
        start += size
    return out


def _run_all(executor, fns):
    futures = [executor.submit(fn) for fn in fns]
    for fut in futures:
        fut.result()


def for_each_patch_block(level, decomps, strategy, work):
    """Invoke ``work(patch_index, block_index)`` once per block.

    ``decomps`` supplies one BlockDecomposition per patch, in patch order.
    A raising task aborts the dispatch: remaining tasks already submitted
    may still run, but the first failure propagates to the caller.
    """
    if len(decomps) != len(level.patches):
        raise ValueError(
            f"need one decomposition per patch, got {len(decomps)} "
            f"for {len(level.patches)} patches"
        )
    if strategy.kind == "serial":
        for pi in range(len(level.patches)):
            for bi in range(len(decomps[pi].ranges)):
                work(pi, bi)
        return

    def run_patches(indices):
        for pi in indices:
            for bi in range(len(decomps[pi].ranges)):
                work(pi, bi)

    def run_pairs(pairs):
        for pi, bi in pairs:
            work(pi, bi)

    if strategy.kind == "patch_parallel":
        buckets = partition_patches(level, strategy.patch_workers, strategy.assignment)
        with ThreadPoolExecutor(strategy.patch_workers) as pool:
            _run_all(pool, [lambda b=b: run_patches(b) for b in buckets])
        return

    if strategy.kind == "block_parallel":
        flat = [
            (pi, bi)
            for pi in range(len(level.patches))
            for bi in range(len(decomps[pi].ranges))
        ]
        with ThreadPoolExecutor(strategy.block_workers) as pool:
            _run_all(
                pool,
                [lambda c=c: run_pairs(c) for c in _chunks(flat, strategy.block_workers)],
            )
        return

    # two_level: each patch worker drives its own group of block workers.
    buckets = partition_patches(level, strategy.patch_workers, strategy.assignment)
    q = strategy.block_workers

    def run_group(indices):
        with ThreadPoolExecutor(q) as inner:
            for pi in indices:
                pairs = [(pi, bi) for bi in range(len(decomps[pi].ranges))]
                _run_all(inner, [lambda c=c: run_pairs(c) for c in _chunks(pairs, q)])

    with ThreadPoolExecutor(strategy.patch_workers) as outer:
        _run_all(outer, [lambda b=b: run_group(b) for b in buckets])
