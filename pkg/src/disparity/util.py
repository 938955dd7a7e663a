"""Small shared helpers: canonical JSON and an injectable clock.

Canonical JSON is the package-wide serialization convention: sorted keys,
compact separators, UTF-8. Two code paths that serialize the same object
must produce byte-identical text (the CLI/HTTP parity contract), so all
artifact writers go through :func:`canonical_json`.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os

CLOCK_ENV = "DISPARITY_CLOCK"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def now_iso() -> str:
    """Current UTC time as ISO-8601 seconds, overridable via DISPARITY_CLOCK.

    The override exists so pipelines can be replayed byte-identically;
    anything that stamps an artifact must take its time from here.
    """
    pinned = os.environ.get(CLOCK_ENV)
    if pinned:
        return pinned
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_date(text: str) -> _dt.date:
    return _dt.date.fromisoformat(text.strip())
