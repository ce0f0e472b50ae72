"""Small shared helpers."""

from __future__ import annotations

import hashlib


def derive_seed(base: int, *tags) -> int:
    """Stable sub-seed from a base seed and arbitrary string/int tags.

    Uses SHA-256 so the derivation is identical across processes and
    platforms (unlike the salted builtin ``hash``).
    """
    material = "|".join([str(int(base))] + [str(t) for t in tags])
    digest = hashlib.sha256(material.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
