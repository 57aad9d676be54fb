"""Seeded, splittable random streams.

Every stream is a Philox-4x64 counter-based generator keyed from a root
seed plus a tuple of labels. Streams for different labels are independent,
and a stream's output never depends on which other streams were drawn
first, so results do not depend on iteration order or thread count.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(root: int, *labels: object) -> int:
    """64-bit child seed from a root seed and a label path (blake2b)."""
    h = hashlib.blake2b(digest_size=8, person=b"artifact-rng")
    h.update(int(root & MASK64).to_bytes(8, "little"))
    for label in labels:
        tag = repr(label).encode()
        h.update(len(tag).to_bytes(4, "little"))
        h.update(tag)
    return int.from_bytes(h.digest(), "little")


def stream(root: int, *labels: object) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(derive_seed(root, *labels))))
