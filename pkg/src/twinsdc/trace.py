"""Recorded task trees.

A task is identified by its path: the tuple of child indices leading to it
from the root, so ``()`` is the root and ``(0, 1)`` the second child of the
first child.  Paths are independent of which worker ran a task and in what
order, which makes two replicas directly comparable by key.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, replace
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

from .errors import (
    ChildrenIncomplete,
    DoubleWrite,
    Incomplete,
    NonContiguousChild,
    UnknownParent,
    UnknownPath,
)

TaskPath = Tuple[int, ...]

ROOT: TaskPath = ()
ROOT_TOKEN = "·"


def format_path(path: Iterable[int]) -> str:
    path = tuple(path)
    if not path:
        return ROOT_TOKEN
    return ".".join(str(i) for i in path)


def parse_path(text: str) -> TaskPath:
    text = text.strip()
    if text in (ROOT_TOKEN, "", "root"):
        return ROOT
    try:
        path = tuple(int(part) for part in text.split("."))
    except ValueError:
        raise ValueError(f"malformed task path {text!r}") from None
    if any(i < 0 for i in path):
        raise ValueError(f"malformed task path {text!r}")
    return path


def parent_of(path: TaskPath) -> TaskPath:
    if not path:
        raise ValueError("the root task has no parent")
    return path[:-1]


def ancestors(path: TaskPath) -> Iterator[TaskPath]:
    """Yield every proper prefix of ``path``, nearest first."""
    for k in range(len(path) - 1, -1, -1):
        yield path[:k]


@dataclass
class TaskRecord:
    path: TaskPath
    result: Optional[bytes] = None
    child_count: int = 0
    marked: bool = False


class Trace:
    """The task tree of one replica together with every task result.

    ``record_spawn`` and ``record_result`` may be called from several worker
    threads at once as long as each call concerns a different task.
    """

    def __init__(self) -> None:
        self.records: Dict[TaskPath, TaskRecord] = {ROOT: TaskRecord(ROOT)}
        self.final_result: Optional[bytes] = None
        self.complete = False
        # Wall-clock seconds of the run that produced the trace, if any.
        self.elapsed: Optional[float] = None
        self.spawn_events = 0
        self.result_events = 0
        self._counter_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, path) -> bool:
        return tuple(path) in self.records

    def __getitem__(self, path) -> TaskRecord:
        try:
            return self.records[tuple(path)]
        except KeyError:
            raise UnknownPath(path) from None

    def record_spawn(self, parent: TaskPath, child_index: int) -> TaskPath:
        rec = self.records.get(parent)
        if rec is None:
            raise UnknownParent(parent)
        if child_index != rec.child_count:
            raise NonContiguousChild(
                parent + (child_index,),
                f"expected child index {rec.child_count}",
            )
        path = parent + (child_index,)
        self.records[path] = TaskRecord(path)
        rec.child_count += 1
        with self._counter_lock:
            self.spawn_events += 1
        return path

    def record_result(self, path: TaskPath, result: bytes) -> None:
        rec = self.records.get(path)
        if rec is None:
            raise UnknownPath(path)
        if rec.result is not None:
            raise DoubleWrite(path)
        for i in range(rec.child_count):
            if self.records[path + (i,)].result is None:
                raise ChildrenIncomplete(path, f"child {i} has no result")
        rec.result = bytes(result)
        with self._counter_lock:
            self.result_events += 1
        if not path:
            self.final_result = rec.result
            self.complete = True

    def children(self, path: TaskPath) -> List[TaskRecord]:
        rec = self[path]
        return [self.records[path + (i,)] for i in range(rec.child_count)]

    def paths(self) -> List[TaskPath]:
        """All recorded paths in lexicographic order."""
        return sorted(self.records)

    def structural_signature(self) -> bytes:
        """Digest of the tree shape, independent of recording order."""
        if not self.complete:
            raise Incomplete("structural signature needs a complete trace")
        h = hashlib.sha256()
        for path in self.paths():
            rec = self.records[path]
            h.update(f"{format_path(path)}\t{rec.child_count}\n".encode())
        return h.digest()

    def check_invariants(self) -> None:
        """Full scan for prefix closure and child contiguity."""
        for path, rec in self.records.items():
            if path and path[:-1] not in self.records:
                raise AssertionError(f"{format_path(path)} has no parent record")
            for i in range(rec.child_count):
                if path + (i,) not in self.records:
                    raise AssertionError(f"{format_path(path)} misses child {i}")
            if path + (rec.child_count,) in self.records:
                raise AssertionError(f"{format_path(path)} has an uncounted child")

    def annotated(self, marked: Iterable[TaskPath]) -> "Trace":
        """A copy whose records carry ``marked=True`` for the given paths."""
        marked = set(marked)
        out = Trace()
        out.records = {
            p: replace(r, marked=p in marked) for p, r in self.records.items()
        }
        out.final_result = self.final_result
        out.complete = self.complete
        out.elapsed = self.elapsed
        return out

    # -- text dump -----------------------------------------------------

    def dumps(self) -> str:
        lines = []
        for path in self.paths():
            rec = self.records[path]
            payload = rec.result.hex() if rec.result is not None else ""
            lines.append(f"{format_path(path)}\t{rec.child_count}\t{payload}")
        return "\n".join(lines) + "\n"

    def dump(self, fp) -> None:
        fp.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Trace":
        trace = cls()
        trace.records = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ValueError(f"line {lineno}: expected 3 tab-separated fields")
            path = parse_path(fields[0])
            result = bytes.fromhex(fields[2]) if fields[2] else None
            trace.records[path] = TaskRecord(path, result, int(fields[1]))
        if ROOT not in trace.records:
            raise ValueError("trace dump has no root record")
        trace.check_invariants()
        root = trace.records[ROOT]
        if root.result is not None:
            trace.final_result = root.result
            trace.complete = True
        return trace

    @classmethod
    def load(cls, fp) -> "Trace":
        return cls.loads(fp.read())
