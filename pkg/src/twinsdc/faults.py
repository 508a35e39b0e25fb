"""Deterministic silent-data-corruption injection by flipping result bits."""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import PositionOutOfRange, TargetPathInvalid
from .seeding import derive_seed
from .trace import TaskPath, Trace

REPLICAS = ("original", "twin", "reprocess")


def corrupt(result: bytes, bit_positions: Sequence[int]) -> bytes:
    """XOR-flip the given bit positions; bit ``p`` is bit ``p % 8`` of byte ``p // 8``."""
    out = bytearray(result)
    limit = 8 * len(out)
    for p in bit_positions:
        if not 0 <= p < limit:
            raise PositionOutOfRange(f"bit {p} outside a {len(out)}-byte result")
        out[p >> 3] ^= 1 << (p & 7)
    return bytes(out)


@dataclass(frozen=True)
class FaultPlan:
    """Which task results get corrupted, in which replica.

    Targets are either an explicit list of ``paths`` or ``count`` tasks drawn
    uniformly with ``selection_seed``.  Count-based plans are resolved into
    explicit paths by :func:`arm` against a reference tree shape.
    """

    replica: str = "original"
    paths: Optional[Tuple[TaskPath, ...]] = None
    count: int = 0
    selection_seed: int = 0
    bits_per_fault: int = 1
    bit_seed: int = 0

    def __post_init__(self):
        if self.replica not in REPLICAS:
            raise ValueError(f"unknown replica {self.replica!r}")
        if self.bits_per_fault < 1:
            raise ValueError("bits_per_fault must be at least 1")
        if self.count < 0:
            raise ValueError("count must be non-negative")
        if self.paths is not None:
            object.__setattr__(self, "paths", tuple(tuple(p) for p in self.paths))

    @property
    def resolved(self) -> bool:
        return self.paths is not None or self.count == 0

    def targets(self) -> Tuple[TaskPath, ...]:
        if self.paths is None:
            if self.count:
                raise ValueError("count-based plan has not been resolved yet")
            return ()
        return self.paths

    def resolve(self, candidates: Iterable[TaskPath]) -> "FaultPlan":
        """Pick ``count`` distinct targets from ``candidates`` by path rank."""
        if self.paths is not None:
            return self
        ranked = sorted(set(tuple(p) for p in candidates))
        if self.count > len(ranked):
            raise ValueError(
                f"cannot select {self.count} targets among {len(ranked)} tasks"
            )
        rng = random.Random(self.selection_seed)
        picked = sorted(rng.sample(range(len(ranked)), self.count))
        return replace(self, paths=tuple(ranked[i] for i in picked))

    def bit_positions(self, path: TaskPath, nbytes: int) -> List[int]:
        if self.bits_per_fault > 8 * nbytes:
            raise PositionOutOfRange(
                f"cannot flip {self.bits_per_fault} bits of a {nbytes}-byte result"
            )
        rng = random.Random(derive_seed(self.bit_seed, tuple(path)))
        return sorted(rng.sample(range(8 * nbytes), self.bits_per_fault))


def arm(plan: FaultPlan, config, reference=None):
    """Return a copy of ``config`` that also applies ``plan``.

    ``reference`` (a :class:`Trace` or an iterable of paths) supplies the
    tree shape that count-based plans select from, and lets explicit targets
    be validated before anything runs.
    """
    if reference is not None:
        candidates = reference.paths() if isinstance(reference, Trace) else list(reference)
        plan = plan.resolve(candidates)
        known = set(candidates)
        for p in plan.targets():
            if p not in known:
                raise TargetPathInvalid(p, "path does not occur in the task tree")
    elif not plan.resolved:
        raise ValueError("a count-based fault plan needs a reference tree to select from")
    return replace(config, fault_plans=tuple(config.fault_plans) + (plan,))


class Injector:
    """Per-execution hook that corrupts planned results right before return.

    Every target is hit at most once for the injector's lifetime; several
    plans naming the same task stack their flips.
    """

    def __init__(self, plans: Iterable[FaultPlan], replica: str):
        self.replica = replica
        self._plans: Dict[TaskPath, List[FaultPlan]] = {}
        for plan in plans:
            if plan.replica != replica:
                continue
            for p in plan.targets():
                self._plans.setdefault(p, []).append(plan)
        self.hit: Dict[TaskPath, bytes] = {}

    def __bool__(self) -> bool:
        return bool(self._plans)

    @property
    def targets(self):
        return frozenset(self._plans)

    def apply(self, path: TaskPath, result: bytes) -> bytes:
        plans = self._plans.get(path)
        if plans is None or path in self.hit:
            return result
        for plan in plans:
            result = corrupt(result, plan.bit_positions(path, len(result)))
        self.hit[path] = result
        return result

    def missed(self) -> List[TaskPath]:
        return sorted(p for p in self._plans if p not in self.hit)

    def check_all_hit(self) -> None:
        missed = self.missed()
        if missed:
            raise TargetPathInvalid(missed[0], f"never ran in the {self.replica} replica")
