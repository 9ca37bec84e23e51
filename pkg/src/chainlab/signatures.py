"""Algebraic stand-in for ECDSA signatures.

A signature is a pair ``(r, s)`` of integers modulo the public group order
``GROUP_ORDER`` bound to a key id.  Nothing here is secure; it exists so that
malleability (``(r, s)`` and ``(r, q - s)`` both verify) and its cure by
normalisation can be exercised.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

# order of the secp256k1 group
GROUP_ORDER = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
HALF_ORDER = (GROUP_ORDER - 1) // 2


class OutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class Signature:
    r: int
    s: int
    key_id: str

    @property
    def is_normal(self) -> bool:
        return self.s <= HALF_ORDER

    def malleate(self) -> "Signature":
        """The other valid encoding of the same signature."""
        return Signature(self.r, GROUP_ORDER - self.s, self.key_id)

    def serialize(self) -> bytes:
        """Minimal big-endian encoding, no leading zero bytes."""
        def enc(x: int) -> bytes:
            b = x.to_bytes(max(1, (x.bit_length() + 7) // 8), "big")
            return len(b).to_bytes(1, "big") + b
        return enc(self.r) + enc(self.s) + self.key_id.encode()


def _scalar(*parts: str) -> int:
    h = hashlib.sha256("|".join(parts).encode()).digest()
    return int.from_bytes(h, "big") % (GROUP_ORDER - 1) + 1


def sign(key_id: str, message: str) -> Signature:
    """Deterministic signature of ``message``; ``s`` may land in either half."""
    return Signature(_scalar("r", key_id, message), _scalar("s", key_id, message), key_id)


def normalize_signature(r: int, s: int, key_id: str = "") -> Signature:
    """Canonical form with ``s`` in the lower half of the group."""
    if not (0 < r < GROUP_ORDER and 0 < s < GROUP_ORDER):
        raise OutOfRange("r and s must lie in (0, q)")
    return Signature(r, min(s, GROUP_ORDER - s), key_id)


def verify(sig: Signature, key_id: str, *, require_normal: bool = False) -> bool:
    """Structural verification: right key, in range, optionally normal form."""
    if sig.key_id != key_id:
        return False
    if not (0 < sig.r < GROUP_ORDER and 0 < sig.s < GROUP_ORDER):
        return False
    return sig.is_normal or not require_normal
