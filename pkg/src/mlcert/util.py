"""Hashing, canonical JSON and small filesystem helpers."""

from __future__ import annotations

import hashlib
import json
import os
import re
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

from mlcert.errors import IoFailure

SHA256_HEX_RE = re.compile(r"^[0-9a-f]{64}$")

Clock = Callable[[], datetime]


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | os.PathLike[str]) -> str:
    try:
        return sha256_bytes(Path(path).read_bytes())
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def canonical_json(obj: Any) -> bytes:
    """Serialize ``obj`` with sorted keys, no whitespace and shortest round-trip floats.

    NaN and infinities are rejected so every document has exactly one encoding.
    """
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False
    ).encode("ascii")


def write_bytes(path: str | os.PathLike[str], data: bytes) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def format_timestamp(moment: datetime) -> str:
    """Render ``moment`` as an RFC 3339 UTC string (``...Z``)."""
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    moment = moment.astimezone(timezone.utc)
    spec = "microseconds" if moment.microsecond else "seconds"
    return moment.replace(tzinfo=None).isoformat(timespec=spec) + "Z"


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC 3339 timestamp; a trailing ``Z`` is accepted."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    moment = datetime.fromisoformat(text)
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=timezone.utc)
    return moment


def fixed_clock(moment: datetime) -> Clock:
    return lambda: moment


def system_clock() -> datetime:
    return datetime.now(timezone.utc)
