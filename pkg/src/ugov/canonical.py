"""Canonical JSON encoding shared by the event log, snapshots, and the API.

Canonical form: sorted keys, no insignificant whitespace, UTF-8, floats in
shortest round-trip decimal (Python's float repr). Two equal values always
produce byte-identical encodings, which is what replay verification and the
determinism checks diff against.
"""

from __future__ import annotations

import json
from typing import Any

FORMAT_VERSION = 1


def dumps(obj: Any) -> str:
    """Encode to canonical JSON text (no trailing newline)."""
    return json.dumps(
        obj,
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    )


def dumps_line(obj: Any) -> str:
    """One canonical-JSON record, LF-terminated (event log / NDJSON framing)."""
    return dumps(obj) + "\n"


def loads(text: str) -> Any:
    return json.loads(text)
