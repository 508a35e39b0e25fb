"""Benchmark task bodies: cutoff Fibonacci, sibling-chained trees and
perfect binary trees, plus the 64-bit result codec they share."""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field
from typing import Any, Dict

MASK64 = (1 << 64) - 1

_U64 = struct.Struct("<Q")
_PAIR = struct.Struct("<QQ")


def encode_u64(value: int) -> bytes:
    return _U64.pack(value & MASK64)


def decode_u64(data: bytes) -> int:
    return _U64.unpack(data)[0]


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def fib_reference(n: int) -> int:
    """Fibonacci with fib(0) = fib(1) = 1, computed iteratively."""
    a, b = 1, 1
    for _ in range(n - 1):
        a, b = b, (a + b) & MASK64
    return b if n >= 1 else a


def fib_naive(n: int) -> int:
    if n < 2:
        return 1
    return (fib_naive(n - 1) + fib_naive(n - 2)) & MASK64


@dataclass(frozen=True)
class Benchmark:
    name: str
    body: Any
    input: bytes
    params: Dict[str, int] = field(default_factory=dict)


class FibBody:
    """Recursive Fibonacci; arguments up to ``cutoff`` are evaluated in-task.

    ``naive_leaves`` evaluates below the cutoff with the exponential
    recursion instead of the linear loop; both give identical results.
    """

    def __init__(self, cutoff: int = 0, naive_leaves: bool = False):
        self.cutoff = cutoff
        self.naive_leaves = naive_leaves

    def __call__(self, data: bytes, ctx) -> bytes:
        n = decode_u64(data)
        if n < 2:
            return encode_u64(1)
        if n <= self.cutoff:
            return encode_u64(fib_naive(n) if self.naive_leaves else fib_reference(n))
        a = ctx.spawn(encode_u64(n - 1))
        b = ctx.spawn(encode_u64(n - 2))
        return encode_u64(decode_u64(ctx.get(a)) + decode_u64(ctx.get(b)))


def bench_fib(n: int, cutoff: int = 0, naive_leaves: bool = False) -> Benchmark:
    return Benchmark(
        "fib", FibBody(cutoff, naive_leaves), encode_u64(n), {"n": n, "cutoff": cutoff}
    )


class ChainBody:
    """Each child's input is the previous sibling's result, so a wrong early
    child corrupts the whole subtree of every later sibling."""

    def __init__(self, width: int):
        self.width = width

    def __call__(self, data: bytes, ctx) -> bytes:
        remaining, value = _PAIR.unpack(data)
        x = splitmix64(value)
        if remaining == 0:
            return encode_u64(x)
        for _ in range(self.width):
            x = decode_u64(ctx.get(ctx.spawn(_PAIR.pack(remaining - 1, x))))
        return encode_u64(splitmix64(x ^ value))


def bench_chain(depth: int, width: int, seed: int = 1) -> Benchmark:
    if depth < 1 or width < 1:
        raise ValueError("chain depth and width must be at least 1")
    return Benchmark(
        "chain", ChainBody(width), _PAIR.pack(depth, seed & MASK64),
        {"depth": depth, "width": width},
    )


def spin(units: int, salt: int) -> int:
    x = 0
    for _ in range(units):
        x = (x * 6364136223846793005 + salt + 1442695040888963407) & MASK64
    return x


class PerfectTreeBody:
    """Binary recursion to a fixed height; a task returns its subtree size
    plus the output of ``work_units`` iterations of a busy-work loop."""

    def __init__(self, work_units: int = 0):
        self.work_units = work_units

    def __call__(self, data: bytes, ctx) -> bytes:
        height = decode_u64(data)
        acc = 1 + spin(self.work_units, height)
        if height:
            left = ctx.spawn(encode_u64(height - 1))
            right = ctx.spawn(encode_u64(height - 1))
            acc += decode_u64(ctx.get(left)) + decode_u64(ctx.get(right))
        return encode_u64(acc)


def bench_perfect_tree(h: int, work_units: int = 0) -> Benchmark:
    if h < 0:
        raise ValueError("height must be non-negative")
    return Benchmark(
        "tree", PerfectTreeBody(work_units), encode_u64(h),
        {"height": h, "work_units": work_units},
    )


class NondeterministicBody:
    """Deliberately breaks the determinism contract: child counts come from
    an unseeded system random source.  Used to exercise abort handling."""

    _rng = random.SystemRandom()

    def __call__(self, data: bytes, ctx) -> bytes:
        height = decode_u64(data)
        if height == 0:
            return encode_u64(1)
        k = self._rng.randint(1, 6)
        acc = k
        for h in [ctx.spawn(encode_u64(height - 1)) for _ in range(k)]:
            acc = splitmix64(acc + decode_u64(ctx.get(h)))
        return encode_u64(acc)


def bench_nondeterministic(height: int = 4) -> Benchmark:
    return Benchmark("nondet", NondeterministicBody(), encode_u64(height), {"height": height})
