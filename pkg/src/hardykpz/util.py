"""Small shared helpers: deterministic float formatting and config hashing."""

from __future__ import annotations

import hashlib
import json


def fmt17(x: float) -> str:
    """17-significant-digit repr so emitted numbers round-trip exactly."""
    return format(float(x), ".17g")


def canonical_json(obj) -> str:
    """Key-order-independent JSON rendering used for hashing and replay."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    """Stable hex digest of a configuration mapping."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()
