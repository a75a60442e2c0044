"""Deterministic seed derivation for reproducible parallel replication.

All randomness in the package flows from a single base seed. Replication
and chunk seeds are derived by mixing the base seed with a chain of labels
through splitmix64, so results are independent of execution order and
worker count.
"""

from __future__ import annotations

import hashlib

_MASK = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    # Steele/Lea/Flood finalizer; bijective on 64-bit ints.
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def _label_to_int(label) -> int:
    if isinstance(label, bool):
        return int(label)
    if isinstance(label, int):
        return label & _MASK
    if isinstance(label, float):
        label = repr(label)
    if isinstance(label, str):
        digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"unsupported seed label type: {type(label).__name__}")


def derive_seed(base_seed: int, *labels) -> int:
    """Mix ``base_seed`` with ``labels`` into a 64-bit seed.

    Pure and collision-resistant: identical inputs give identical output,
    and distinct label chains collide with probability ~2^-64.
    """
    h = _splitmix64(int(base_seed) & _MASK)
    for label in labels:
        h = _splitmix64(h ^ _label_to_int(label))
    return h
