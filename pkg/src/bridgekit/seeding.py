"""Deterministic seed derivation for independent RNG streams.

hash() is salted per process, so sub-stream seeds are derived with
blake2b instead; the same (base, labels) always yields the same child
seed on any machine.
"""

import hashlib


def derive_seed(base, *labels):
    """Derive a 64-bit child seed from a base seed and a label path."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(base).to_bytes(16, "little", signed=True))
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")
