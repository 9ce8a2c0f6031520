"""Deterministic stream derivation on top of a counter-based generator.

Every source of randomness in the package draws from a Philox generator
keyed by a seed derived from a root seed plus a context path, e.g.
``(seed, "tree", b)`` for tree ``b`` or ``(seed, "perm", r)`` for
permutation replicate ``r``. Derivation hashes the path with BLAKE2b, so
streams are independent of each other, stable across platforms and
process invocations, and adding consumers never perturbs existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_key", "generator"]


def derive_key(*parts: int | str) -> int:
    """Hash a context path of ints and strings to a 128-bit stream key."""
    h = hashlib.blake2b(digest_size=16)
    for part in parts:
        if isinstance(part, (bool, np.bool_)) or not isinstance(
                part, (int, np.integer, str)):
            raise TypeError(f"stream path parts must be int or str, got {part!r}")
        if isinstance(part, np.integer):
            part = int(part)
        tag = b"i" if isinstance(part, int) else b"s"
        data = str(part).encode()
        h.update(tag + len(data).to_bytes(4, "little") + data)
    return int.from_bytes(h.digest(), "little")


def generator(*parts: int | str) -> np.random.Generator:
    """Counter-based generator for the stream named by the context path."""
    return np.random.Generator(np.random.Philox(key=derive_key(*parts)))
