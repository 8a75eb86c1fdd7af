"""Hashing and key-derivation helpers shared across the protocol layers.

Every derived value is domain-separated by an explicit label so that
byte-equal inputs in different roles can never collide. Seeded expansion
exists for reproducibility of the artifact: callers pass 64-bit seeds and
get deterministic byte streams.
"""

from __future__ import annotations

import hashlib

from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

__all__ = ["tagged_hash", "hkdf_sha256", "expand_seed"]

_SEED_MASK = (1 << 64) - 1


def tagged_hash(label: str, data: bytes) -> bytes:
    """SHA-256 of ``label || 0x00 || data``; 32 bytes."""
    return hashlib.sha256(label.encode("ascii") + b"\x00" + data).digest()


def hkdf_sha256(ikm: bytes, label: str, salt: bytes | None = None, length: int = 32) -> bytes:
    """HKDF-SHA256 with the label as the info string."""
    return HKDF(
        algorithm=hashes.SHA256(),
        length=length,
        salt=salt,
        info=label.encode("ascii"),
    ).derive(ikm)


def expand_seed(seed: int, label: str, nbytes: int) -> bytes:
    """Deterministic byte stream from a 64-bit seed, per-label independent."""
    shake = hashlib.shake_256()
    shake.update(label.encode("ascii") + b"\x00" + (seed & _SEED_MASK).to_bytes(8, "big"))
    return shake.digest(nbytes)
