"""Deterministic seed derivation.

Every random draw in the simulator flows from one master seed through
`derive_seed`, so a scenario is reproducible bit-for-bit from that single
integer.  Child seeds are labelled by purpose ("power", "client", ...) and
round/node indices, which keeps the streams independent of execution order.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(master: int, *parts: int | str) -> int:
    """Derive a 64-bit child seed from a master seed and a label path."""
    h = hashlib.sha256()
    h.update(str(int(master) & MASK64).encode())
    for part in parts:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "little") & MASK64


def rng_for(master: int, *parts: int | str) -> np.random.Generator:
    """Seeded generator for the stream identified by the label path."""
    return np.random.default_rng(derive_seed(master, *parts))
