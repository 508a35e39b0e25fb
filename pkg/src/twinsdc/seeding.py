"""Stable 64-bit seed derivation from a master seed and arbitrary keys."""

import hashlib


def derive_seed(master: int, *keys) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(repr((int(master),) + tuple(keys)).encode())
    return int.from_bytes(h.digest(), "little")
