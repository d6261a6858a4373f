from __future__ import annotations

from collections.abc import Iterable
from pathlib import Path

import numpy as np

from mlcert.core import CertificationModel, EvidenceRecord
from mlcert.errors import IoFailure, MalformedArtifact
from mlcert.util import Clock, format_timestamp, system_clock


def resolve(cm: CertificationModel, base_dir: str | Path | None) -> Path:
    path = Path(cm.target.artifact_path)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    return path


def plain(value):
    """Convert numpy scalars/arrays into JSON-native Python values."""
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def records(cm: CertificationModel, digest: str, items: Iterable[tuple[str, object]],
            clock: Clock | None = None) -> list[EvidenceRecord]:
    stamp = format_timestamp((clock or system_clock)())
    params = dict(cm.evidence.parameters)
    return [
        EvidenceRecord(
            factor=cm.factor,
            name=name,
            value=plain(value),
            artifact_digest=digest,
            collector_params=params,
            timestamp=stamp,
        )
        for name, value in items
    ]


def read_artifact(path: Path, what: str) -> bytes:
    try:
        return path.read_bytes()
    except FileNotFoundError as exc:
        raise MalformedArtifact(f"{what} {path} does not exist") from exc
    except OSError as exc:
        raise IoFailure(f"cannot read {what} {path}: {exc}") from exc
