"""Canonical JSON serialization shared by hashing and export code paths.

All content identifiers, proposal ids, and state roots hash these bytes,
so the encoding must be byte-stable: sorted keys, no insignificant
whitespace, UTF-8, and a fixed rendering for the few non-JSON types we
carry around (bytes, enums, dataclasses, sets).
"""

from __future__ import annotations

import dataclasses
import enum
import json
from typing import Any


def _plain(value: Any) -> Any:
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, (bytes, bytearray)):
        return "0x" + bytes(value).hex()
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {str(_plain(k)): _plain(v) for k, v in value.items()}
    if isinstance(value, (set, frozenset)):
        return sorted(str(_plain(v)) for v in value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "hex_str"):
        return value.hex_str()
    return value


def canonical_json(value: Any) -> bytes:
    """Serialize ``value`` to deterministic UTF-8 JSON bytes."""
    return json.dumps(
        _plain(value), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")
