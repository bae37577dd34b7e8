"""Small shared helpers."""

from __future__ import annotations

import hashlib


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from a global seed plus task identifiers.

    Hash-based so it does not depend on process, schedule, or worker count;
    parallel runs reproduce serial ones bit for bit.
    """
    key = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
