"""Independent oracles and fixtures shared by the test modules."""

import hashlib

from twinsdc import Trace, corrupt
from twinsdc.runtime import RuntimeConfig, run


def fib_paper(n):
    # Direct transcription of the recursive definition, no runtime involved.
    return 1 if n < 2 else fib_paper(n - 1) + fib_paper(n - 2)


def fib_task_count(n, cutoff=0):
    if n < 2 or n <= cutoff:
        return 1
    return 1 + fib_task_count(n - 1, cutoff) + fib_task_count(n - 2, cutoff)


def differing_paths(a, b):
    """Every path whose result bytes differ between two same-shape traces."""
    return {p for p in a.records if a.records[p].result != b.records[p].result}


def impacting_paths(a, b):
    """Brute force: differing paths whose every ancestor also differs."""
    diff = differing_paths(a, b)
    return {p for p in diff if all(p[:k] in diff for k in range(len(p)))}


def build_trace(shape, results):
    """Record a trace by hand from ``{path: child_count}`` and ``{path: bytes}``."""
    t = Trace()
    for path in sorted(shape):
        for i in range(shape[path]):
            t.record_spawn(path, i)
    for path in sorted(shape, key=lambda p: (-len(p), p)):
        t.record_result(path, results[path])
    return t


# Task tree of the worked traversal example, letters as in the figure.
FIG1 = {
    "A": (), "B": (0,), "C": (1,), "D": (0, 0), "E": (0, 1), "F": (1, 0),
    "G": (0, 0, 0), "H": (0, 0, 1), "I": (0, 1, 0), "J": (0, 0, 1, 0),
    "K": (0, 0, 1, 1), "L": (0, 1, 0, 0),
}
FIG1_NAME = {path: name for name, path in FIG1.items()}
FIG1_SHAPE = {
    path: sum(1 for q in FIG1.values() if len(q) == len(path) + 1 and q[:-1] == path)
    for path in FIG1.values()
}
# H and F are the fault sources.  H's corruption reaches D, B, A through its
# result and J, E through parameter passing; C absorbs F's corruption.
FIG1_DIFFERING = set("ABDEHJF")


def fig1_body(data, ctx):
    """Deterministic body with the figure's tree shape.

    Each child's input is its predecessor sibling's result, so E consumes D.
    """
    path_text, _, value = data.partition(b"|")
    path = tuple(int(x) for x in path_text.split(b".") if x)
    acc = value
    parts = [path_text, value]
    for i in range(FIG1_SHAPE[path]):
        child = ".".join(str(x) for x in path + (i,)).encode()
        acc = ctx.get(ctx.spawn(child + b"|" + acc))
        parts.append(acc)
    return hashlib.sha256(b"/".join(parts)).digest()[:8]


FIG1_INPUT = b"|seed"


def fig1_traces():
    """(original, twin) where the original differs exactly at FIG1_DIFFERING."""
    _, twin = run(fig1_body, FIG1_INPUT, RuntimeConfig())
    results = {p: r.result for p, r in twin.records.items()}
    for name in FIG1_DIFFERING:
        results[FIG1[name]] = corrupt(results[FIG1[name]], [0])
    original = build_trace(FIG1_SHAPE, results)
    return original, twin


class AccessLog(dict):
    """dict that remembers which keys were read through ``[]``."""

    def __init__(self, *args):
        super().__init__(*args)
        self.read = set()

    def __getitem__(self, key):
        self.read.add(key)
        return super().__getitem__(key)
