"""Expected recovery cost for a single SDC in a perfect binary task tree.

A tree of height ``h`` has ``2**(h+1) - 1`` equally likely, equally costly
tasks.  A fault at depth ``d`` is charged the ``d + 1`` tasks on its path to
the root plus the ``2**(h-d+1) - 1`` tasks of its subtree (the worst case).
All exact quantities are returned as :class:`fractions.Fraction`.
"""

from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple

import numpy as np

from .bench import bench_perfect_tree
from .detect import mark_corrupted
from .errors import DepthOutOfRange
from .faults import FaultPlan, arm
from .runtime import RuntimeConfig, run


@dataclass(frozen=True)
class BinaryTreeModel:
    h: int

    def __post_init__(self):
        if self.h < 0:
            raise ValueError("height must be non-negative")

    @property
    def total_tasks(self) -> int:
        return 2 ** (self.h + 1) - 1


def _check(h, d):
    if h < 0 or not 0 <= d <= h:
        raise DepthOutOfRange(f"depth {d} outside a tree of height {h}")


def n_of_d(h: int, d: int) -> int:
    """Worst-case tasks to reprocess for a fault at depth ``d``.

    Path and subtree both count the faulty task, so ``n_of_d(0, 0) == 2``
    even though that tree has a single task.
    """
    _check(h, d)
    return d + 2 ** (h - d + 1)


def p_of_d(h: int, d: int) -> Fraction:
    _check(h, d)
    return Fraction(2**d, 2 ** (h + 1) - 1)


def expected_reprocessed_closed(h: int) -> Fraction:
    if h < 0:
        raise DepthOutOfRange(f"negative height {h}")
    return 2 * h + Fraction(2 * h + 2, 2 ** (h + 1) - 1)


def expected_reprocessed_exact(h: int) -> Fraction:
    if h < 0:
        raise DepthOutOfRange(f"negative height {h}")
    return sum((p_of_d(h, d) * n_of_d(h, d) for d in range(h + 1)), Fraction(0))


def expected_marked_path_only(h: int) -> Fraction:
    """Expected marked-set size when only the faulty task's result is wrong."""
    if h < 0:
        raise DepthOutOfRange(f"negative height {h}")
    return sum((p_of_d(h, d) * (d + 1) for d in range(h + 1)), Fraction(0))


def depth_of_index(i: int) -> int:
    """Depth of the task with breadth-first index ``i`` (root is 0)."""
    return (i + 1).bit_length() - 1


def monte_carlo_reprocessed(h: int, trials: int, seed: int) -> Tuple[float, float]:
    """Sample the worst-case cost of one uniformly placed fault.

    Returns ``(mean, standard_error)``; the error is 0 for a single trial.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    model = BinaryTreeModel(h)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, model.total_tasks, size=trials, dtype=np.int64)
    depth = np.frexp((idx + 1).astype(np.float64))[1].astype(np.int64) - 1
    cost = depth + np.exp2(h - depth + 1)
    mean = float(cost.mean())
    if trials == 1:
        return mean, 0.0
    return mean, float(cost.std(ddof=1) / math.sqrt(trials))


def breadth_first_path(i: int) -> Tuple[int, ...]:
    """Task path of breadth-first index ``i`` in a perfect binary tree."""
    d = depth_of_index(i)
    offset = i - (2**d - 1)
    return tuple((offset >> (d - 1 - k)) & 1 for k in range(d))


def measured_marked_distribution(h: int, trials: int, seed: int, config=None,
                                 work_units: int = 0) -> Counter:
    """Histogram of marked-set sizes for single return-time flips.

    Each trial flips one bit of a uniformly chosen task's result in the
    original replica of the perfect-tree benchmark, then detects and marks.
    """
    config = config or RuntimeConfig()
    bench = bench_perfect_tree(h, work_units)
    _, twin = run(bench.body, bench.input, config, replica="twin")
    total = BinaryTreeModel(h).total_tasks
    rng = random.Random(seed)
    sizes: Counter = Counter()
    for _ in range(trials):
        path = breadth_first_path(rng.randrange(total))
        plan = FaultPlan("original", paths=(path,), bit_seed=rng.getrandbits(64))
        _, original = run(bench.body, bench.input, arm(plan, config))
        sizes[len(mark_corrupted(original, twin))] += 1
    return sizes
