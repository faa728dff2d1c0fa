"""Dispatch tests run against lightweight stand-ins where only patch sizes
matter (load balancing arithmetic) and against real levels where tasks
actually execute."""

import itertools
import threading
import time
from types import SimpleNamespace

import pytest

from patchsmooth.grid import Level, Patch, PatchDims, decompose_blocks
from patchsmooth.runtime import (
    ExecutionStrategy,
    for_each_patch_block,
    partition_patches,
)

ALL_STRATEGIES = [
    ExecutionStrategy.serial(),
    ExecutionStrategy.patch_parallel(3),
    ExecutionStrategy.block_parallel(4),
    ExecutionStrategy.two_level(2, 2),
]


def _two_patch_level():
    dims = PatchDims(4, 4, 4)
    return Level([Patch(dims), Patch(dims, origin=(4, 0, 0))])


def _fake_level(sizes):
    patches = [SimpleNamespace(dims=PatchDims(*s)) for s in sizes]
    return SimpleNamespace(patches=patches)


def _loads(level, buckets):
    return [
        sum(level.patches[i].dims.interior_cells for i in b) for b in buckets
    ]


@pytest.mark.parametrize("strategy", ALL_STRATEGIES, ids=lambda s: s.kind)
def test_every_task_runs_exactly_once(strategy):
    level = _two_patch_level()
    decomps = [decompose_blocks(p.dims, (2, 2, 2)) for p in level.patches]
    seen = {}
    lock = threading.Lock()

    def work(pi, bi):
        with lock:
            seen[(pi, bi)] = seen.get((pi, bi), 0) + 1

    for_each_patch_block(level, decomps, strategy, work)
    want = {(pi, bi) for pi in range(2) for bi in range(8)}
    assert set(seen) == want
    assert all(c == 1 for c in seen.values())


def test_serial_order_is_lexicographic():
    level = _two_patch_level()
    decomps = [decompose_blocks(p.dims, (2, 2, 2)) for p in level.patches]
    trace = []
    for_each_patch_block(
        level, decomps, ExecutionStrategy.serial(), lambda pi, bi: trace.append((pi, bi))
    )
    assert trace == [(pi, bi) for pi in range(2) for bi in range(8)]


def test_single_worker_strategies_reproduce_serial_order():
    level = _two_patch_level()
    decomps = [decompose_blocks(p.dims, (2, 2, 2)) for p in level.patches]

    def trace_of(strategy):
        trace = []
        for_each_patch_block(level, decomps, strategy, lambda pi, bi: trace.append((pi, bi)))
        return trace

    serial = trace_of(ExecutionStrategy.serial())
    assert trace_of(ExecutionStrategy.patch_parallel(1)) == serial
    assert trace_of(ExecutionStrategy.block_parallel(1)) == serial
    assert trace_of(ExecutionStrategy.two_level(1, 1)) == serial


def test_decomps_must_match_patch_count():
    level = _two_patch_level()
    decomps = [decompose_blocks(level.patches[0].dims, (2, 2, 2))]
    with pytest.raises(ValueError):
        for_each_patch_block(level, decomps, ExecutionStrategy.serial(), lambda pi, bi: None)


@pytest.mark.parametrize("strategy", ALL_STRATEGIES, ids=lambda s: s.kind)
def test_worker_exception_propagates(strategy):
    level = _two_patch_level()
    decomps = [decompose_blocks(p.dims, (2, 2, 2)) for p in level.patches]

    def work(pi, bi):
        if (pi, bi) == (1, 3):
            raise RuntimeError("boom")

    with pytest.raises(RuntimeError, match="boom"):
        for_each_patch_block(level, decomps, strategy, work)


def test_greedy_isolates_the_large_patch():
    level = _fake_level([(96, 96, 96)] + [(64, 64, 64)] * 3)
    assert partition_patches(level, 2, "greedy") == [[0], [1, 2, 3]]


def test_equal_patches_split_evenly():
    level = _fake_level([(2, 2, 2)] * 96)
    for method in ("greedy", "round_robin", "in_order"):
        buckets = partition_patches(level, 4, method)
        assert sorted(len(b) for b in buckets) == [24] * 4
        assert sorted(i for b in buckets for i in b) == list(range(96))


def test_greedy_buckets_keep_indices_ascending():
    level = _fake_level([(9, 1, 1), (2, 1, 1), (7, 1, 1), (7, 1, 1), (3, 1, 1)])
    for b in partition_patches(level, 2, "greedy"):
        assert b == sorted(b)


def test_round_robin_and_in_order_layouts():
    level = _fake_level([(1, 1, 1)] * 5)
    assert partition_patches(level, 2, "round_robin") == [[0, 2, 4], [1, 3]]
    assert partition_patches(level, 2, "in_order") == [[0, 1, 2], [3, 4]]


def test_partition_rejects_bad_arguments():
    level = _fake_level([(1, 1, 1)])
    with pytest.raises(ValueError):
        partition_patches(level, 0)
    with pytest.raises(ValueError):
        partition_patches(level, True)
    with pytest.raises(ValueError):
        partition_patches(level, 2, "random")


def test_greedy_balances_mixed_size_collection():
    # five cube sizes, 16 patches each: worst/best worker load stays tight
    sizes = [(n, n, n) for n in (64, 72, 80, 88, 96) for _ in range(16)]
    level = _fake_level(sizes)
    loads = _loads(level, partition_patches(level, 4, "greedy"))
    assert max(loads) <= 1.1 * min(loads)


def test_greedy_within_four_thirds_of_optimum():
    """Classic LPT-style bound, checked against brute force on small sets."""
    import random

    rng = random.Random(5)
    for _ in range(20):
        n = rng.randint(5, 9)
        loads = [rng.randint(1, 9) for _ in range(n)]
        level = _fake_level([(L, 1, 1) for L in loads])
        greedy = max(_loads(level, partition_patches(level, 3, "greedy")))
        opt = min(
            max(
                sum(loads[i] for i in range(n) if assign[i] == w)
                for w in range(3)
            )
            for assign in itertools.product(range(3), repeat=n)
        )
        assert 3 * greedy <= 4 * opt


def test_greedy_beats_in_order_on_front_loaded_work():
    """Four 8-unit patches then eight 1-unit ones: contiguous ranges pile
    the big patches onto one worker (makespan 24 units) while greedy spreads
    them (10 units).  Tasks sleep in proportion so wall time shows the gap."""
    sizes = [(200, 200, 200)] * 4 + [(100, 100, 100)] * 8
    level = _fake_level(sizes)
    decomps = [SimpleNamespace(ranges=[None]) for _ in sizes]

    g_loads = _loads(level, partition_patches(level, 4, "greedy"))
    o_loads = _loads(level, partition_patches(level, 4, "in_order"))
    assert max(g_loads) < max(o_loads)

    def work(pi, bi):
        time.sleep(level.patches[pi].dims.interior_cells * 2e-8)

    def timed(assignment):
        strategy = ExecutionStrategy.patch_parallel(4, assignment=assignment)
        t0 = time.perf_counter()
        for_each_patch_block(level, decomps, strategy, work)
        return time.perf_counter() - t0

    wall_greedy = timed("greedy")
    wall_inorder = timed("in_order")
    assert wall_greedy < 0.75 * wall_inorder


def test_strategy_validation():
    with pytest.raises(ValueError):
        ExecutionStrategy(kind="hybrid")
    with pytest.raises(ValueError):
        ExecutionStrategy.patch_parallel(0)
    with pytest.raises(ValueError):
        ExecutionStrategy.two_level(2, -1)
    with pytest.raises(ValueError):
        ExecutionStrategy(patch_workers=True)
    with pytest.raises(ValueError):
        ExecutionStrategy.patch_parallel(2, assignment="fifo")


def test_strategy_width():
    assert ExecutionStrategy.serial().width == 1
    assert ExecutionStrategy.patch_parallel(3).width == 3
    assert ExecutionStrategy.block_parallel(5).width == 5
    assert ExecutionStrategy.two_level(2, 3).width == 6
