"""Evidence for the process factor: the training manifest and its checkpoint trail."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path, PurePosixPath

from mlcert.collectors._evidence import read_artifact, records, resolve
from mlcert.core import CertificationModel, Factor, FactorOutcome, evaluate_predicate
from mlcert.errors import FactorMismatch, IoFailure, MalformedArtifact, UnknownTechnique
from mlcert.target.mlp import model_from_json
from mlcert.target.training import KNOWN_TECHNIQUES, TrainingManifest
from mlcert.util import sha256_bytes

VALID = "valid"
INVALID = "invalid"


def manifest_from_bytes(data: bytes) -> TrainingManifest:
    if not data.strip():
        raise MalformedArtifact("manifest is empty")
    try:
        raw = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedArtifact(f"manifest is not valid JSON: {exc}") from exc
    manifest = TrainingManifest.from_dict(raw)
    for technique in manifest.techniques:
        if technique not in KNOWN_TECHNIQUES:
            raise UnknownTechnique(f"unknown training technique {technique!r}")
    return manifest


def parse_manifest(path: str | Path) -> TrainingManifest:
    return manifest_from_bytes(read_artifact(Path(path), "manifest"))


@dataclass(frozen=True)
class TrailReport:
    integrity: str
    files: tuple[tuple[str, str], ...]  # (file, status)

    @property
    def valid(self) -> bool:
        return self.integrity == VALID

    def problems(self) -> list[str]:
        return [f"{name}: {status}" for name, status in self.files if status != "ok"]


def verify_checkpoint_trail(m: TrainingManifest, directory: str | Path) -> TrailReport:
    """Check that every listed checkpoint exists, matches its digest and parses.

    Parsed checkpoints must have the architecture recorded in the manifest (or,
    when the manifest records none, the architecture of the last checkpoint).
    """
    directory = Path(directory)
    expected_dims = m.layer_dims
    statuses: list[tuple[str, str]] = []
    parsed_dims: list[tuple[int, tuple[int, ...]]] = []

    for entry in m.checkpoints:
        rel = PurePosixPath(entry.file)
        if rel.is_absolute() or ".." in rel.parts:
            statuses.append((entry.file, "path escapes the training output"))
            continue
        path = directory / rel
        try:
            blob = path.read_bytes()
        except FileNotFoundError:
            statuses.append((entry.file, "missing"))
            continue
        except OSError as exc:
            raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
        if sha256_bytes(blob) != entry.sha256:
            statuses.append((entry.file, "digest mismatch"))
            continue
        try:
            model = model_from_json(blob)
        except MalformedArtifact as exc:
            statuses.append((entry.file, f"unparseable ({exc})"))
            continue
        parsed_dims.append((len(statuses), model.layer_dims))
        statuses.append((entry.file, "ok"))

    if expected_dims is None and parsed_dims:
        expected_dims = parsed_dims[-1][1]
    for position, dims in parsed_dims:
        if dims != expected_dims:
            statuses[position] = (statuses[position][0], f"layer dims {list(dims)} != {list(expected_dims)}")

    epochs = [c.epoch for c in m.checkpoints]
    ok = bool(statuses) and all(s == "ok" for _, s in statuses) and epochs == sorted(set(epochs))
    if not m.checkpoints:
        statuses.append(("(none)", "no checkpoints recorded"))
    elif epochs != sorted(set(epochs)):
        statuses.append(("(manifest)", "checkpoint epochs not strictly increasing"))
    return TrailReport(VALID if ok else INVALID, tuple(statuses))


def _strength(manifest: TrainingManifest, technique: str, key: str):
    if technique not in manifest.techniques:
        return None
    section = manifest.hyperparameters.get(technique)
    if not isinstance(section, dict):
        return None
    value = section.get(key)
    return value if isinstance(value, (int, float)) and not isinstance(value, bool) else None


def assess_process_factor(cm: CertificationModel, *, base_dir: str | Path | None = None,
                          clock=None) -> FactorOutcome:
    if cm.factor is not Factor.PROCESS:
        raise FactorMismatch(f"process collector given a {cm.factor.value} model")
    path = resolve(cm, base_dir)
    raw = read_artifact(path, "manifest")
    manifest = manifest_from_bytes(raw)
    trail = verify_checkpoint_trail(manifest, path.parent)
    digest = sha256_bytes(raw)
    evidence = records(cm, digest, [
        ("techniques", list(manifest.techniques)),
        ("sigma", _strength(manifest, "randomized_smoothing", "sigma")),
        ("epsilon", _strength(manifest, "adversarial_training", "epsilon")),
        ("checkpoint_integrity", trail.integrity),
        ("checkpoint_report", [f"{name}: {status}" for name, status in trail.files]),
        ("checkpoint_count", len(manifest.checkpoints)),
        ("manifest_sha256", digest),
    ], clock)
    return evaluate_predicate(cm.property, evidence)
