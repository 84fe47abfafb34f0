"""Stable seed derivation for parallel-safe, order-independent randomness."""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *parts) -> int:
    """64-bit seed from a master seed and a tuple of labels.

    Named stages keyed this way stay reproducible regardless of execution
    order, which is what keeps common-random-number comparisons honest.
    """
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "big")
