"""Nested fork-join execution with randomized work stealing.

A task body is a plain callable ``body(input: bytes, ctx) -> bytes``.  It
forks with ``ctx.spawn(child_input)`` (optionally naming a different body)
and joins with ``ctx.get(handle)``, which returns the child's result bytes::

    def fib(data, ctx):
        n = decode_u64(data)
        if n < 2:
            return encode_u64(1)
        a = ctx.spawn(encode_u64(n - 1))
        b = ctx.spawn(encode_u64(n - 2))
        return encode_u64(decode_u64(ctx.get(a)) + decode_u64(ctx.get(b)))

Bodies must be deterministic and free of side effects.  Children are
numbered in spawn order, so both replicas of a computation assign every task
the same path no matter which worker ran it.

Each worker owns a deque: spawned children go on the right, the owner pops
from the right and thieves take from the left of a uniformly chosen victim.
A worker blocked in ``get`` keeps running local or stolen tasks until the
child it waits for is done.  With ``workers=1`` children run inline at their
spawn, which is the sequential depth-first reference schedule.
"""

from __future__ import annotations

import random
import threading
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple

from .errors import TaskPanicked, TwinError
from .faults import FaultPlan, Injector
from .seeding import derive_seed
from .trace import ROOT, TaskPath, Trace

TaskBody = Callable[[bytes, "SpawnContext"], bytes]

_MAX_BACKOFF = 1e-3


@dataclass(frozen=True)
class RuntimeConfig:
    workers: int = 1
    steal_seed: int = 0
    tracking: bool = True
    fault_plans: Tuple[FaultPlan, ...] = ()

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass
class RunStats:
    """Runtime-side counters, kept independently of the trace."""

    spawns: int = 0
    tasks: int = 0
    suppressed: int = 0
    steals: int = 0
    tasks_per_worker: List[int] = field(default_factory=list)


class _Aborted(BaseException):
    """Unwinds tasks after another task failed."""


class _Task:
    __slots__ = ("path", "body", "input", "result", "error", "done")

    def __init__(self, path, body, data):
        self.path = path
        self.body = body
        self.input = data
        self.result = None
        self.error = None
        self.done = False


class _Worker:
    __slots__ = ("index", "queue", "rng", "spawns", "tasks", "suppressed", "steals")

    def __init__(self, index, seed):
        self.index = index
        self.queue = deque()
        self.rng = random.Random(seed)
        self.spawns = 0
        self.tasks = 0
        self.suppressed = 0
        self.steals = 0


class SpawnContext:
    """Handed to a task body; forks children and joins on their results."""

    __slots__ = ("_ex", "_task", "_worker", "_next", "_pending")

    def __init__(self, ex, task, worker):
        self._ex = ex
        self._task = task
        self._worker = worker
        self._next = 0
        self._pending = set()

    @property
    def path(self) -> TaskPath:
        return self._task.path

    @property
    def child_count(self) -> int:
        return self._next

    def spawn(self, child_input: bytes, body: Optional[TaskBody] = None):
        index = self._next
        self._next += 1
        child = self._ex.spawn(self, index, bytes(child_input), body or self._task.body)
        self._pending.add(child)
        return child

    def get(self, handle) -> bytes:
        if handle not in self._pending:
            raise ValueError("handle was not spawned by this task or was already retrieved")
        self._ex.wait(handle, self._worker)
        self._pending.discard(handle)
        if handle.error is not None:
            raise handle.error
        return handle.result

    def _sync_all(self):
        for handle in sorted(self._pending, key=lambda t: t.path):
            self.get(handle)


class Execution:
    """One execution of a task tree.

    ``replay`` is an optional hook object providing ``reuse(parent, path)``
    (returning recorded bytes to suppress a spawn, or ``None``) and
    ``completed(path, result, child_count)``; the replay layer uses it for
    spawn suppression and per-task result checks.
    """

    def __init__(self, config: RuntimeConfig, *, trace=None, injector=None, replay=None):
        self.config = config
        self.trace = trace
        self.injector = injector if injector else None
        self.replay = replay
        self.workers = [
            _Worker(i, derive_seed(config.steal_seed, "worker", i))
            for i in range(config.workers)
        ]
        self.sequential = config.workers == 1
        self.finished = False
        self.aborted = False
        self.failure: Optional[BaseException] = None
        self._fail_lock = threading.Lock()

    # -- task lifecycle --------------------------------------------------

    def spawn(self, ctx: SpawnContext, index: int, data: bytes, body) -> _Task:
        worker = ctx._worker
        worker.spawns += 1
        parent = ctx._task.path
        path = parent + (index,)
        task = _Task(path, body, data)
        if self.replay is not None:
            reused = self.replay.reuse(parent, path)
            if reused is not None:
                worker.suppressed += 1
                task.result = reused
                task.done = True
                return task
        if self.trace is not None:
            self.trace.record_spawn(parent, index)
        if self.sequential:
            self.execute(task, worker)
        else:
            worker.queue.append(task)
        return task

    def execute(self, task: _Task, worker: _Worker) -> None:
        """Run one task to completion; errors are stored on the task."""
        worker.tasks += 1
        ctx = SpawnContext(self, task, worker)
        try:
            result = task.body(task.input, ctx)
            ctx._sync_all()
            if not isinstance(result, (bytes, bytearray, memoryview)):
                raise TypeError(
                    f"task body returned {type(result).__name__}, expected bytes"
                )
            result = bytes(result)
            if self.injector is not None:
                result = self.injector.apply(task.path, result)
            if self.replay is not None:
                result = self.replay.completed(task.path, result, ctx.child_count)
            if self.trace is not None:
                self.trace.record_result(task.path, result)
            task.result = result
        except _Aborted as exc:
            task.error = exc
        except TwinError as exc:
            task.error = exc
            self._fail(exc)
        except Exception as exc:
            err = TaskPanicked(task.path, f"body raised {type(exc).__name__}: {exc}")
            err.__cause__ = exc
            task.error = err
            self._fail(err)
        task.done = True

    def _fail(self, exc):
        with self._fail_lock:
            if self.failure is None:
                self.failure = exc
            self.aborted = True

    # -- scheduling ------------------------------------------------------

    def _find_work(self, worker: _Worker) -> Optional[_Task]:
        try:
            return worker.queue.pop()
        except IndexError:
            pass
        n = len(self.workers)
        if n < 2:
            return None
        victim = worker.rng.randrange(n - 1)
        if victim >= worker.index:
            victim += 1
        try:
            task = self.workers[victim].queue.popleft()
        except IndexError:
            return None
        worker.steals += 1
        return task

    def wait(self, task: _Task, worker: _Worker) -> None:
        delay = 0.0
        while not task.done:
            if self.aborted:
                raise _Aborted()
            other = self._find_work(worker)
            if other is not None:
                self.execute(other, worker)
                delay = 0.0
            else:
                delay = min(_MAX_BACKOFF, delay * 2 or 1e-5)
                time.sleep(delay)

    def _thief_loop(self, worker: _Worker) -> None:
        delay = 0.0
        while not self.finished:
            task = None if self.aborted else self._find_work(worker)
            if task is not None:
                self.execute(task, worker)
                delay = 0.0
            else:
                delay = min(_MAX_BACKOFF, delay * 2 or 1e-5)
                time.sleep(delay)

    def run(self, body: TaskBody, data: bytes) -> bytes:
        root = _Task(ROOT, body, bytes(data))
        threads = [
            threading.Thread(target=self._thief_loop, args=(w,), daemon=True)
            for w in self.workers[1:]
        ]
        for t in threads:
            t.start()
        try:
            self.execute(root, self.workers[0])
        finally:
            self.finished = True
            for t in threads:
                t.join()
        if self.failure is not None:
            raise self.failure
        return root.result

    def fill_stats(self, stats: RunStats) -> RunStats:
        stats.spawns += sum(w.spawns for w in self.workers)
        stats.tasks += sum(w.tasks for w in self.workers)
        stats.suppressed += sum(w.suppressed for w in self.workers)
        stats.steals += sum(w.steals for w in self.workers)
        per = [w.tasks for w in self.workers]
        if len(stats.tasks_per_worker) < len(per):
            stats.tasks_per_worker.extend([0] * (len(per) - len(stats.tasks_per_worker)))
        for i, n in enumerate(per):
            stats.tasks_per_worker[i] += n
        return stats


def run(
    root_body: TaskBody,
    root_input: bytes,
    config: RuntimeConfig = RuntimeConfig(),
    *,
    replica: str = "original",
    stats: Optional[RunStats] = None,
) -> Tuple[bytes, Optional[Trace]]:
    """Execute ``root_body`` and return ``(final_result, trace)``.

    ``trace`` is ``None`` when tracking is off.  Fault plans in ``config``
    naming ``replica`` are applied.
    """
    trace = Trace() if config.tracking else None
    injector = Injector(config.fault_plans, replica)
    ex = Execution(config, trace=trace, injector=injector)
    start = time.perf_counter()
    try:
        final = ex.run(root_body, root_input)
    finally:
        if stats is not None:
            ex.fill_stats(stats)
    if trace is not None:
        trace.elapsed = time.perf_counter() - start
    injector.check_all_hit()
    return final, trace


def run_replicated(
    root_body: TaskBody,
    root_input: bytes,
    config: RuntimeConfig = RuntimeConfig(),
    *,
    stats: Optional[RunStats] = None,
) -> Tuple[Trace, Trace]:
    """Run the original and then the twin replica back to back.

    Each trace's ``elapsed`` holds the wall-clock duration of its run.
    """
    if not config.tracking:
        raise ValueError("replicated execution needs tracking enabled")
    _, original = run(root_body, root_input, config, replica="original", stats=stats)
    twin_config = config
    if config.workers > 1:
        twin_config = _reseed(config, "twin")
    _, twin = run(root_body, root_input, twin_config, replica="twin", stats=stats)
    return original, twin


def _reseed(config: RuntimeConfig, label: str) -> RuntimeConfig:
    return replace(config, steal_seed=derive_seed(config.steal_seed, label))
