"""Divergence detection and corrupted-task marking over two replica traces."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import FrozenSet

from .errors import ChildCountMismatch, Incomplete
from .trace import ROOT, TaskPath, Trace


class Verdict(enum.Enum):
    AGREE = "agree"
    DISAGREE = "disagree"


@dataclass(frozen=True)
class MarkedSet:
    paths: FrozenSet[TaskPath]
    visited_comparisons: int
    # Compared children whose results agreed: the reuse boundary.
    frontier: FrozenSet[TaskPath] = frozenset()

    def __len__(self):
        return len(self.paths)

    def __contains__(self, path):
        return tuple(path) in self.paths

    def __iter__(self):
        return iter(sorted(self.paths))


EMPTY = MarkedSet(frozenset(), 0, frozenset())


def detect(original: Trace, twin: Trace) -> Verdict:
    if not (original.complete and twin.complete):
        raise Incomplete("both replicas must have finished")
    if original.final_result == twin.final_result:
        return Verdict.AGREE
    return Verdict.DISAGREE


def mark_corrupted(original: Trace, twin: Trace) -> MarkedSet:
    """Walk both trees from the root and mark every task reachable through
    children whose results differ.

    Children are compared in ascending index order; a child whose results
    agree is not descended into.  Returns an empty set when the final
    results agree.
    """
    if detect(original, twin) is Verdict.AGREE:
        return EMPTY
    orig, other = original.records, twin.records
    marked = set()
    frontier = set()
    comparisons = 0
    stack = [ROOT]
    while stack:
        path = stack.pop()
        marked.add(path)
        a, b = orig[path], other[path]
        if a.child_count != b.child_count:
            raise ChildCountMismatch(
                path,
                f"original spawned {a.child_count} children, twin {b.child_count}",
            )
        diverged = []
        for i in range(a.child_count):
            child = path + (i,)
            comparisons += 1
            if orig[child].result != other[child].result:
                diverged.append(child)
            else:
                frontier.add(child)
        # Reversed so the lowest index is expanded first.
        stack.extend(reversed(diverged))
    return MarkedSet(frozenset(marked), comparisons, frozenset(frontier))
