"""Recovery by re-running only the marked tasks.

During a replay round every spawn whose path is not scheduled for
recomputation is suppressed and the parent receives the recorded result
instead.  Each recomputed result is checked against the two recorded
replica values: matching either accepts it, matching neither schedules the
task (and its ancestors) for another round.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Set

from .detect import MarkedSet
from .errors import ReuseConflict, RoundsExhausted, SpawnShapeDiverged
from .faults import Injector
from .runtime import Execution, RunStats, RuntimeConfig, TaskBody
from .trace import TaskPath, Trace, ancestors

DEFAULT_MAX_ROUNDS = 3


@dataclass
class ReplayOutcome:
    final: bytes
    rounds: int
    recomputed: int
    reused: int
    executed_per_round: List[int] = field(default_factory=list)
    unresolved_per_round: List[FrozenSet[TaskPath]] = field(default_factory=list)
    executions: Counter = field(default_factory=Counter)
    reused_paths: Set[TaskPath] = field(default_factory=set)
    elapsed: float = 0.0


class _Round:
    def __init__(self, original: Trace, twin: Trace, execute: Set[TaskPath],
                 accepted: Dict[TaskPath, bytes]):
        self.original = original.records
        self.twin = twin.records
        self.execute = execute
        self.accepted = accepted
        self.results: Dict[TaskPath, bytes] = {}
        self.unresolved: Set[TaskPath] = set()
        self.executions: Counter = Counter()
        self.reused: Set[TaskPath] = set()

    def reuse(self, parent: TaskPath, path: TaskPath) -> Optional[bytes]:
        rec = self.original.get(path)
        if rec is None:
            raise SpawnShapeDiverged(
                parent,
                f"spawned more than the {self.original[parent].child_count} recorded children",
            )
        if path in self.execute:
            return None
        self.reused.add(path)
        if path in self.accepted:
            return self.accepted[path]
        if self.twin[path].result != rec.result:
            raise ReuseConflict(path, "recorded results differ between replicas")
        return rec.result

    def completed(self, path: TaskPath, result: bytes, child_count: int) -> bytes:
        rec = self.original[path]
        if child_count != rec.child_count:
            raise SpawnShapeDiverged(
                path, f"spawned {child_count} children, {rec.child_count} recorded"
            )
        self.executions[path] += 1
        if result != rec.result and result != self.twin[path].result:
            self.unresolved.add(path)
        self.results[path] = result
        return result


def _closure(paths) -> Set[TaskPath]:
    out = set(paths)
    for p in list(out):
        out.update(ancestors(p))
    return out


def replay(
    root_body: TaskBody,
    root_input: bytes,
    original: Trace,
    twin: Trace,
    marked: MarkedSet,
    config: RuntimeConfig = RuntimeConfig(),
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    *,
    stats: Optional[RunStats] = None,
) -> ReplayOutcome:
    """Recompute the marked tasks, reusing every agreed child result.

    Fault plans in ``config`` naming the ``"reprocess"`` replica are applied
    once each over all rounds.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    if not marked.paths:
        return ReplayOutcome(final=original.final_result, rounds=0, recomputed=0, reused=0)

    injector = Injector(config.fault_plans, "reprocess")
    accepted: Dict[TaskPath, bytes] = {}
    outcome = ReplayOutcome(final=b"", rounds=0, recomputed=0, reused=0)
    execute = set(marked.paths)
    previous: Optional[FrozenSet[TaskPath]] = None
    start = time.perf_counter()
    while True:
        outcome.rounds += 1
        hook = _Round(original, twin, execute, accepted)
        ex = Execution(config, injector=injector, replay=hook)
        final = ex.run(root_body, root_input)
        round_stats = ex.fill_stats(RunStats())
        if stats is not None:
            ex.fill_stats(stats)

        outcome.final = final
        outcome.recomputed += round_stats.tasks
        outcome.reused += round_stats.suppressed
        outcome.executed_per_round.append(round_stats.tasks)
        outcome.executions.update(hook.executions)
        outcome.reused_paths.update(hook.reused)
        unresolved = frozenset(hook.unresolved)
        outcome.unresolved_per_round.append(unresolved)
        accepted.update(
            (p, r) for p, r in hook.results.items() if p not in unresolved
        )
        if not unresolved:
            break
        if outcome.rounds >= max_rounds or (
            previous is not None and len(unresolved) >= len(previous)
        ):
            outcome.elapsed = time.perf_counter() - start
            raise RoundsExhausted(outcome.rounds, unresolved)
        previous = unresolved
        execute = _closure(unresolved)
    outcome.elapsed = time.perf_counter() - start
    injector.check_all_hit()
    return outcome
