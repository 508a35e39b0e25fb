import threading
import time

import pytest

from twinsdc import (
    FaultPlan,
    RuntimeConfig,
    TaskPanicked,
    arm,
    bench_chain,
    bench_fib,
    bench_perfect_tree,
    decode_u64,
    encode_u64,
    run,
    run_replicated,
)
from twinsdc.runtime import RunStats
from helpers import fib_paper, fib_task_count


def test_fib5_sequential():
    bench = bench_fib(5)
    final, trace = run(bench.body, bench.input, RuntimeConfig(workers=1))
    assert decode_u64(final) == 8 == fib_paper(5)
    assert trace.complete


def test_fib0_four_workers():
    bench = bench_fib(0)
    final, trace = run(bench.body, bench.input, RuntimeConfig(workers=4))
    assert decode_u64(final) == 1
    assert len(trace) == 1


def test_fib10_eight_workers():
    bench = bench_fib(10)
    final, trace = run(bench.body, bench.input, RuntimeConfig(workers=8, steal_seed=3))
    assert decode_u64(final) == 89
    assert len(trace) == 177
    trace.check_invariants()


def test_tracking_off_returns_no_trace():
    bench = bench_fib(6)
    final, trace = run(bench.body, bench.input, RuntimeConfig(tracking=False))
    assert trace is None
    assert decode_u64(final) == fib_paper(6)


BENCHES = [
    bench_fib(14),
    bench_fib(16, cutoff=9),
    bench_chain(3, 3),
    bench_perfect_tree(7, work_units=3),
]


@pytest.mark.parametrize("bench", BENCHES, ids=lambda b: f"{b.name}-{b.params}")
def test_determinism_across_workers_and_seeds(bench):
    ref_final, ref_trace = run(bench.body, bench.input, RuntimeConfig(workers=1))
    expected = (ref_final, ref_trace.structural_signature())
    for workers in (2, 8):
        for seed in range(5):
            final, trace = run(bench.body, bench.input,
                               RuntimeConfig(workers=workers, steal_seed=seed))
            assert (final, trace.structural_signature()) == expected
            assert trace.dumps() == ref_trace.dumps()


@pytest.mark.parametrize("workers", [1, 3, 8])
@pytest.mark.parametrize("bench", BENCHES, ids=lambda b: f"{b.name}-{b.params}")
def test_one_record_per_spawn_and_task(bench, workers):
    stats = RunStats()
    _, trace = run(bench.body, bench.input, RuntimeConfig(workers=workers), stats=stats)
    assert trace.spawn_events == stats.spawns == len(trace) - 1
    assert trace.result_events == stats.tasks == len(trace)
    assert sum(stats.tasks_per_worker) == stats.tasks


def test_fib_cutoff_task_count():
    bench = bench_fib(20, cutoff=12)
    _, trace = run(bench.body, bench.input, RuntimeConfig(workers=4))
    assert len(trace) == fib_task_count(20, 12)


def test_work_stealing_terminates_and_distributes():
    bench = bench_perfect_tree(10, work_units=20)
    stats = RunStats()
    start = time.monotonic()
    _, trace = run(bench.body, bench.input, RuntimeConfig(workers=4, steal_seed=1),
                   stats=stats)
    assert time.monotonic() - start < 60
    assert len(stats.tasks_per_worker) == 4
    assert all(n >= 0 for n in stats.tasks_per_worker)
    assert stats.steals > 0
    assert sum(1 for n in stats.tasks_per_worker if n) > 1


def test_worker_threads_are_joined():
    before = threading.active_count()
    bench = bench_fib(12)
    run(bench.body, bench.input, RuntimeConfig(workers=6))
    assert threading.active_count() == before


def exploding(data, ctx):
    depth = decode_u64(data)
    if depth == 3:
        raise ZeroDivisionError("boom")
    if depth > 3:
        return encode_u64(0)
    hs = [ctx.spawn(encode_u64(depth + 1 + i)) for i in range(2)]
    return encode_u64(sum(decode_u64(ctx.get(h)) for h in hs))


@pytest.mark.parametrize("workers", [1, 4])
def test_task_panic_names_path(workers):
    with pytest.raises(TaskPanicked) as info:
        run(exploding, encode_u64(0), RuntimeConfig(workers=workers))
    err = info.value
    assert isinstance(err.__cause__, ZeroDivisionError)
    # depth sequence 0 -> 1 -> 2 -> 3 reached first via child indices
    assert err.path in {(0, 0, 0), (0, 1), (1, 0)}


def test_non_bytes_result_panics():
    with pytest.raises(TaskPanicked):
        run(lambda data, ctx: 42, b"")


def test_unretrieved_children_are_synced():
    def lazy(data, ctx):
        if data == b"leaf":
            return b"x"
        ctx.spawn(b"leaf")
        ctx.spawn(b"leaf")
        return b"root"

    final, trace = run(lazy, b"", RuntimeConfig(workers=3))
    assert final == b"root"
    assert trace.children(())[1].result == b"x"


def test_replicated_fault_free_agree():
    bench = bench_fib(10)
    original, twin = run_replicated(bench.body, bench.input, RuntimeConfig(workers=4))
    assert original.final_result == twin.final_result
    assert original.elapsed > 0 and twin.elapsed > 0


def test_replicated_original_leaf_flip_diverges():
    bench = bench_fib(10)
    _, ref = run(bench.body, bench.input)
    leaf = next(p for p in ref.paths() if ref[p].child_count == 0)
    cfg = arm(FaultPlan("original", paths=[leaf]), RuntimeConfig(workers=2))
    original, twin = run_replicated(bench.body, bench.input, cfg)
    assert original.final_result != twin.final_result
    assert twin.final_result == ref.final_result


def test_replicated_twin_fault_leaves_original_clean():
    bench = bench_fib(10)
    clean, _ = run(bench.body, bench.input)
    cfg = arm(FaultPlan("twin", paths=[(0, 1)]), RuntimeConfig())
    original, twin = run_replicated(bench.body, bench.input, cfg)
    assert original.final_result == clean
    assert twin.final_result != clean


def test_replicated_requires_tracking():
    bench = bench_fib(3)
    with pytest.raises(ValueError):
        run_replicated(bench.body, bench.input, RuntimeConfig(tracking=False))


def test_config_rejects_zero_workers():
    with pytest.raises(ValueError):
        RuntimeConfig(workers=0)
