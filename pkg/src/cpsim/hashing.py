"""Deterministic hashing and seeded RNG derivation.

Python's builtin hash() is salted per process, so every derived seed and
state digest goes through SHA-256 over a canonical byte form instead.
"""

from __future__ import annotations

import hashlib
import json
import random
from typing import Any


def stable_digest(*parts: Any) -> bytes:
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode("utf-8"))
        h.update(b"\x1f")
    return h.digest()


def stable_hex(*parts: Any, length: int = 16) -> str:
    return stable_digest(*parts).hex()[:length]


def derive_rng(*parts: Any) -> random.Random:
    """Independent RNG stream keyed by an arbitrary tuple of parts."""
    return random.Random(int.from_bytes(stable_digest(*parts)[:8], "big"))


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def json_digest(obj: Any, length: int = 16) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:length]
