"""Deterministic seed derivation.

Every stochastic component in the suite receives its seed through
:func:`derive_seed`, a counter-hash of a master seed and a tuple of string
or integer parts.  Child seeds therefore depend only on *what* is being
seeded, never on execution order, which keeps concurrent and serial runs
bit-identical.
"""

from __future__ import annotations

import hashlib

_MASK = (1 << 63) - 1


def derive_seed(master: int, *parts: object) -> int:
    """Derive a child seed from a master seed and a label tuple.

    The derivation is sha256 over a canonical text encoding of
    ``(master, *parts)``; the first eight bytes of the digest, masked to 63
    bits, become the child seed.  Stable across platforms and Python
    versions.
    """
    payload = ":".join([str(int(master))] + [str(p) for p in parts])
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & _MASK
