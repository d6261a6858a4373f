"""Issuing, serializing and verifying signed certificates.

A certificate file is the canonical JSON encoding of::

    {"payload": {...}, "payload_digest": "<sha256 hex>", "signature": "<ed25519 hex>"}

followed by a single newline. The digest is taken over the canonical encoding
of ``payload``; the Ed25519 signature is over the 32 raw digest bytes.
Verification rejects any file that is not byte-for-byte canonical, so every
modification of the file is detected, not just those that change its meaning.
"""

from __future__ import annotations

import json
import os
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from mlcert.core import (
    FACTOR_ORDER,
    Factor,
    FactorOutcome,
    MergeRule,
    ThreeFactorCertificationModel,
    Verdict,
    merge_outcomes,
)
from mlcert.errors import IncompleteOutcomes, IoFailure, MalformedArtifact, SigningFailure
from mlcert.util import Clock, canonical_json, format_timestamp, sha256_bytes, system_clock, write_bytes

SCHEMA = "mlcert/certificate/v1"
_SIG_RE = re.compile(r"^[0-9a-f]{128}$")
_DIGEST_RE = re.compile(r"^[0-9a-f]{64}$")
_KEY_RE = re.compile(r"^[0-9a-f]{64}$")


@dataclass(frozen=True)
class Certificate:
    payload: Mapping[str, Any]
    payload_digest: str
    signature: str

    @property
    def overall_verdict(self) -> str:
        return self.payload["overall_verdict"]

    @property
    def factor_outcomes(self) -> list[Mapping[str, Any]]:
        return list(self.payload["factor_outcomes"])

    def verdicts(self) -> dict[str, str]:
        return {o["factor"]: o["verdict"] for o in self.payload["factor_outcomes"]}

    def to_dict(self) -> dict[str, Any]:
        return {
            "payload": self.payload,
            "payload_digest": self.payload_digest,
            "signature": self.signature,
        }

    def to_bytes(self) -> bytes:
        return canonical_json(self.to_dict()) + b"\n"

    @classmethod
    def from_bytes(cls, data: bytes) -> "Certificate":
        try:
            raw = json.loads(data)
        except (ValueError, UnicodeDecodeError) as exc:
            raise MalformedArtifact(f"certificate is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict) or set(raw) != {"payload", "payload_digest", "signature"}:
            raise MalformedArtifact("certificate must hold exactly payload, payload_digest, signature")
        if not isinstance(raw["payload"], dict):
            raise MalformedArtifact("certificate payload must be an object")
        if not isinstance(raw["payload_digest"], str) or not isinstance(raw["signature"], str):
            raise MalformedArtifact("digest and signature must be strings")
        return cls(raw["payload"], raw["payload_digest"], raw["signature"])


@dataclass(frozen=True)
class VerificationResult:
    valid: bool
    reason: str

    def __bool__(self) -> bool:
        return self.valid


# -- keys ----------------------------------------------------------------------


def load_signing_key(path: str | os.PathLike[str]) -> Ed25519PrivateKey:
    return Ed25519PrivateKey.from_private_bytes(_read_hex_key(path))


def load_public_key(path: str | os.PathLike[str]) -> Ed25519PublicKey:
    return Ed25519PublicKey.from_public_bytes(_read_hex_key(path))


def _read_hex_key(path: str | os.PathLike[str]) -> bytes:
    try:
        text = Path(path).read_text(encoding="ascii").strip()
    except (OSError, UnicodeDecodeError) as exc:
        raise IoFailure(f"cannot read key {path}: {exc}") from exc
    if not _KEY_RE.match(text):
        raise MalformedArtifact(f"{path} does not hold a 32-byte lowercase hex key")
    return bytes.fromhex(text)


def public_key_hex(key: Ed25519PrivateKey | Ed25519PublicKey) -> str:
    if isinstance(key, Ed25519PrivateKey):
        key = key.public_key()
    return key.public_bytes(Encoding.Raw, PublicFormat.Raw).hex()


def signing_key_from_seed(seed: bytes) -> Ed25519PrivateKey:
    if len(seed) != 32:
        raise SigningFailure("an Ed25519 seed is exactly 32 bytes")
    return Ed25519PrivateKey.from_private_bytes(seed)


def write_keypair(seed: bytes, private_path: str | os.PathLike[str],
                  public_path: str | os.PathLike[str]) -> Ed25519PrivateKey:
    key = signing_key_from_seed(seed)
    write_bytes(private_path, seed.hex().encode("ascii") + b"\n")
    write_bytes(public_path, public_key_hex(key).encode("ascii") + b"\n")
    try:
        os.chmod(private_path, 0o600)
    except OSError:
        pass
    return key


# -- issuance --------------------------------------------------------------------


def _subject(outcomes: Iterable[FactorOutcome],
             cert_model: ThreeFactorCertificationModel | None) -> dict[str, Any]:
    subject: dict[str, Any] = {}
    for outcome in outcomes:
        digests = sorted({r.artifact_digest for r in outcome.evidence})
        entry: dict[str, Any] = {"sha256": digests[0] if len(digests) == 1 else digests}
        if cert_model is not None:
            target = cert_model.for_factor(outcome.factor).target
            entry["artifact_path"] = target.artifact_path
            entry["artifact_kind"] = target.artifact_kind.value
        subject[outcome.factor.value] = entry
    return subject


def _property_name(outcomes: list[FactorOutcome]):
    names = sorted({o.spec.name for o in outcomes if o.spec is not None})
    if not names:
        return None
    return names[0] if len(names) == 1 else names


def sign_payload(payload: Mapping[str, Any], signing_key: Ed25519PrivateKey) -> Certificate:
    try:
        body = canonical_json(payload)
    except (TypeError, ValueError) as exc:
        raise SigningFailure(f"payload cannot be canonicalized: {exc}") from exc
    digest = sha256_bytes(body)
    try:
        signature = signing_key.sign(bytes.fromhex(digest)).hex()
    except Exception as exc:  # noqa: BLE001 - backend errors vary
        raise SigningFailure(str(exc)) from exc
    # round-trip through JSON so the in-memory payload equals what verifiers parse
    return Certificate(json.loads(body), digest, signature)


def issue_certificate(
    outcomes: Iterable[FactorOutcome],
    rule: MergeRule | str,
    signing_key: Ed25519PrivateKey,
    issuer: str,
    clock: Clock | None = None,
    *,
    cert_model: ThreeFactorCertificationModel | None = None,
) -> list[Certificate]:
    """Issue one certificate (``all-pass``) or one per factor (``per-factor``).

    Every evidence record of every outcome is embedded in the payload.
    """
    rule = MergeRule(rule)
    outcomes = sorted(outcomes, key=lambda o: FACTOR_ORDER.index(o.factor))
    if not outcomes:
        raise IncompleteOutcomes("no outcomes to certify")
    if not isinstance(signing_key, Ed25519PrivateKey):
        raise SigningFailure("signing key must be an Ed25519 private key")
    merged = merge_outcomes(outcomes, rule)
    issued_at = format_timestamp((clock or system_clock)())

    def payload(group: list[FactorOutcome], verdict: Verdict) -> dict[str, Any]:
        return {
            "schema": SCHEMA,
            "issuer": issuer,
            "issuer_public_key": public_key_hex(signing_key),
            "issued_at": issued_at,
            "merge_rule": rule.value,
            "property": _property_name(group),
            "subject": _subject(group, cert_model),
            "overall_verdict": verdict.value,
            "factor_outcomes": [o.to_dict() for o in group],
        }

    if rule is MergeRule.ALL_PASS:
        return [sign_payload(payload(outcomes, merged), signing_key)]
    return [sign_payload(payload([o], o.verdict), signing_key) for o in outcomes]


# -- verification ------------------------------------------------------------------


def verify_certificate(cert_bytes: bytes, public_key: Ed25519PublicKey) -> VerificationResult:
    """Check canonical form, payload digest and signature. Never raises."""
    try:
        cert = Certificate.from_bytes(cert_bytes)
    except MalformedArtifact as exc:
        return VerificationResult(False, str(exc))
    try:
        canonical = cert.to_bytes()
    except (TypeError, ValueError) as exc:
        return VerificationResult(False, f"certificate cannot be canonicalized: {exc}")
    if canonical != cert_bytes:
        return VerificationResult(False, "certificate bytes are not in canonical form")
    if not _DIGEST_RE.match(cert.payload_digest):
        return VerificationResult(False, "payload digest is not lowercase SHA-256 hex")
    if not _SIG_RE.match(cert.signature):
        return VerificationResult(False, "signature is not lowercase Ed25519 hex")
    if sha256_bytes(canonical_json(cert.payload)) != cert.payload_digest:
        return VerificationResult(False, "payload digest mismatch")
    try:
        public_key.verify(bytes.fromhex(cert.signature), bytes.fromhex(cert.payload_digest))
    except InvalidSignature:
        return VerificationResult(False, "signature does not verify under the given public key")
    return VerificationResult(True, "payload digest and signature verify")


def write_certificate(cert: Certificate, path: str | os.PathLike[str]) -> None:
    write_bytes(path, cert.to_bytes())


def read_certificate(path: str | os.PathLike[str]) -> Certificate:
    try:
        return Certificate.from_bytes(Path(path).read_bytes())
    except OSError as exc:
        raise IoFailure(f"cannot read certificate {path}: {exc}") from exc


def factor_verdicts(cert: Certificate) -> dict[Factor, Verdict]:
    return {Factor(k): Verdict(v) for k, v in cert.verdicts().items()}
