"""Certification models, property predicates and outcome merging.

A certification model binds a non-functional property to a target of
certification and to the evidence collection procedure that checks it. The
three-factor model holds one such binding for each of the training data, the
training process and the deployed model.
"""

from __future__ import annotations

import enum
import math
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Union

from mlcert.errors import (
    DuplicateFactor,
    FactorMismatch,
    IncompleteOutcomes,
    MalformedConfig,
    MissingEvidence,
    UnknownProcedure,
)
from mlcert.util import SHA256_HEX_RE

Scalar = Union[str, int, float, bool, None]
EvidenceValue = Union[Scalar, list]

_ISO_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?(Z|[+-]\d{2}:\d{2})$")


class Factor(str, enum.Enum):
    DATA = "data"
    PROCESS = "process"
    MODEL = "model"


class Verdict(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"


class MergeRule(str, enum.Enum):
    ALL_PASS = "all-pass"
    PER_FACTOR = "per-factor"


class ArtifactKind(str, enum.Enum):
    DATASET = "dataset"
    MANIFEST = "manifest"
    MODEL = "model"


FACTOR_ORDER = (Factor.DATA, Factor.PROCESS, Factor.MODEL)

KIND_FOR_FACTOR = {
    Factor.DATA: ArtifactKind.DATASET,
    Factor.PROCESS: ArtifactKind.MANIFEST,
    Factor.MODEL: ArtifactKind.MODEL,
}

# procedure id -> factor it collects evidence for
PROCEDURES: Mapping[str, Factor] = MappingProxyType(
    {
        "knn-label-agreement": Factor.DATA,
        "manifest-inspection": Factor.PROCESS,
        "fgsm-recall": Factor.MODEL,
    }
)

# technique -> evidence record holding its strength parameter
TECHNIQUE_STRENGTH = MappingProxyType(
    {"randomized_smoothing": "sigma", "adversarial_training": "epsilon"}
)


def _freeze(params: Mapping[str, Any] | None) -> Mapping[str, Any]:
    return MappingProxyType(dict(params or {}))


def _check_fraction(value: Any, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedConfig(f"{what} must be a number, got {value!r}")
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise MalformedConfig(f"{what} must lie in [0, 1], got {value}")
    return value


# -- predicate descriptors ---------------------------------------------------


@dataclass(frozen=True)
class FlaggedSetEmpty:
    max_flagged_fraction: float = 0.0
    kind = "flagged-set-empty"

    def __post_init__(self):
        object.__setattr__(
            self,
            "max_flagged_fraction",
            _check_fraction(self.max_flagged_fraction, "max_flagged_fraction"),
        )

    def to_dict(self) -> dict:
        return {"kind": self.kind, "max_flagged_fraction": self.max_flagged_fraction}


@dataclass(frozen=True)
class RequiredTechniques:
    techniques: tuple[str, ...]
    kind = "required-techniques"

    def __post_init__(self):
        techniques = tuple(self.techniques)
        if not all(isinstance(t, str) and t for t in techniques):
            raise MalformedConfig("technique names must be non-empty strings")
        object.__setattr__(self, "techniques", techniques)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "techniques": list(self.techniques)}


@dataclass(frozen=True)
class MetricThreshold:
    threshold: float
    metric: str = "recall"
    comparator: str = ">"
    kind = "metric-threshold"

    def __post_init__(self):
        if self.comparator not in (">", ">="):
            raise MalformedConfig(f"unsupported comparator {self.comparator!r}")
        if not self.metric:
            raise MalformedConfig("metric name must be non-empty")
        object.__setattr__(self, "threshold", _check_fraction(self.threshold, "threshold"))

    def holds(self, value: float) -> bool:
        return value > self.threshold if self.comparator == ">" else value >= self.threshold

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "metric": self.metric,
            "comparator": self.comparator,
            "threshold": self.threshold,
        }


Predicate = Union[FlaggedSetEmpty, RequiredTechniques, MetricThreshold]


# -- certification model ------------------------------------------------------


@dataclass(frozen=True)
class PropertySpec:
    """A property together with the means of verifying it."""

    name: str
    factor: Factor
    predicate: Predicate
    verification_means: Mapping[str, Scalar]

    def __post_init__(self):
        object.__setattr__(self, "factor", Factor(self.factor))
        object.__setattr__(self, "verification_means", _freeze(self.verification_means))
        if not self.name:
            raise MalformedConfig("property name must be non-empty")
        if not self.verification_means:
            raise MalformedConfig(f"property {self.name!r} carries no verification means")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "factor": self.factor.value,
            "predicate": self.predicate.to_dict(),
            "verification_means": dict(self.verification_means),
        }


@dataclass(frozen=True)
class TargetDescriptor:
    factor: Factor
    artifact_path: str
    artifact_kind: ArtifactKind

    def __post_init__(self):
        object.__setattr__(self, "factor", Factor(self.factor))
        object.__setattr__(self, "artifact_kind", ArtifactKind(self.artifact_kind))
        if KIND_FOR_FACTOR[self.factor] is not self.artifact_kind:
            raise FactorMismatch(
                f"{self.artifact_kind.value} target cannot be certified on factor "
                f"{self.factor.value}"
            )


@dataclass(frozen=True)
class EvidenceCollectionSpec:
    factor: Factor
    procedure_id: str
    parameters: Mapping[str, Scalar]
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "factor", Factor(self.factor))
        object.__setattr__(self, "parameters", _freeze(self.parameters))
        if self.procedure_id not in PROCEDURES:
            raise UnknownProcedure(f"unknown evidence procedure {self.procedure_id!r}")
        if PROCEDURES[self.procedure_id] is not self.factor:
            raise FactorMismatch(
                f"procedure {self.procedure_id!r} collects evidence for factor "
                f"{PROCEDURES[self.procedure_id].value}, not {self.factor.value}"
            )
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise MalformedConfig(f"seed must be an unsigned integer, got {self.seed!r}")


@dataclass(frozen=True)
class CertificationModel:
    property: PropertySpec
    target: TargetDescriptor
    evidence: EvidenceCollectionSpec

    def __post_init__(self):
        factors = {self.property.factor, self.target.factor, self.evidence.factor}
        if len(factors) != 1:
            raise FactorMismatch(
                "property, target and evidence disagree on factor: "
                + ", ".join(sorted(f.value for f in factors))
            )

    @property
    def factor(self) -> Factor:
        return self.property.factor

    def collector_params(self) -> dict[str, Scalar]:
        """Verification means merged with the evidence parameters.

        A key may appear in both places only if it has the same value.
        """
        merged = dict(self.property.verification_means)
        for key, value in self.evidence.parameters.items():
            if key in merged and merged[key] != value:
                raise MalformedConfig(
                    f"{self.factor.value}: parameter {key!r} conflicts between property "
                    "verification means and evidence parameters"
                )
            merged[key] = value
        return merged


@dataclass(frozen=True)
class ThreeFactorCertificationModel:
    data: CertificationModel
    process: CertificationModel
    model: CertificationModel
    merge_rule: MergeRule = MergeRule.ALL_PASS

    def __post_init__(self):
        object.__setattr__(self, "merge_rule", MergeRule(self.merge_rule))
        for expected, cm in zip(FACTOR_ORDER, self.models()):
            if cm.factor is not expected:
                raise FactorMismatch(
                    f"{expected.value} slot holds a {cm.factor.value} certification model"
                )

    def models(self) -> tuple[CertificationModel, CertificationModel, CertificationModel]:
        return (self.data, self.process, self.model)

    def for_factor(self, factor: Factor) -> CertificationModel:
        return self.models()[FACTOR_ORDER.index(Factor(factor))]


# -- evidence and outcomes ------------------------------------------------------


@dataclass(frozen=True)
class EvidenceRecord:
    factor: Factor
    name: str
    value: EvidenceValue
    artifact_digest: str
    collector_params: Mapping[str, Scalar]
    timestamp: str

    def __post_init__(self):
        object.__setattr__(self, "factor", Factor(self.factor))
        object.__setattr__(self, "collector_params", _freeze(self.collector_params))
        if isinstance(self.value, tuple):
            object.__setattr__(self, "value", list(self.value))
        if not SHA256_HEX_RE.match(self.artifact_digest):
            raise ValueError(f"artifact digest is not lowercase SHA-256 hex: {self.artifact_digest!r}")
        if not _ISO_RE.match(self.timestamp):
            raise ValueError(f"timestamp is not ISO-8601: {self.timestamp!r}")

    def to_dict(self) -> dict:
        return {
            "factor": self.factor.value,
            "name": self.name,
            "value": self.value,
            "artifact_digest": self.artifact_digest,
            "collector_params": dict(self.collector_params),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "EvidenceRecord":
        return cls(
            factor=raw["factor"],
            name=raw["name"],
            value=raw["value"],
            artifact_digest=raw["artifact_digest"],
            collector_params=raw["collector_params"],
            timestamp=raw["timestamp"],
        )


@dataclass(frozen=True)
class FactorOutcome:
    factor: Factor
    verdict: Verdict
    evidence: tuple[EvidenceRecord, ...]
    reason: str
    spec: PropertySpec | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "factor", Factor(self.factor))
        object.__setattr__(self, "verdict", Verdict(self.verdict))
        object.__setattr__(self, "evidence", tuple(self.evidence))
        if self.verdict is Verdict.FAIL and not self.reason:
            raise ValueError("a failing outcome needs a reason")

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def to_dict(self) -> dict:
        out = {
            "factor": self.factor.value,
            "verdict": self.verdict.value,
            "reason": self.reason,
            "evidence": [r.to_dict() for r in self.evidence],
        }
        if self.spec is not None:
            out["property"] = self.spec.to_dict()
        return out


def _lookup(evidence: Sequence[EvidenceRecord], name: str) -> EvidenceRecord:
    # the most recent record wins: evidence is append-only
    for record in reversed(evidence):
        if record.name == name:
            return record
    raise MissingEvidence(f"evidence {name!r} is missing")


def _fmt(value: Any) -> str:
    return f"{value:.4g}" if isinstance(value, float) else str(value)


def evaluate_predicate(
    property: PropertySpec, evidence: Iterable[EvidenceRecord]
) -> FactorOutcome:
    """Decide the verdict for one factor from its collected evidence."""
    evidence = tuple(evidence)
    if not evidence:
        raise MissingEvidence(f"no evidence collected for factor {property.factor.value}")
    for record in evidence:
        if record.factor is not property.factor:
            raise FactorMismatch(
                f"{record.factor.value} evidence {record.name!r} offered to a "
                f"{property.factor.value} property"
            )

    predicate = property.predicate
    if isinstance(predicate, FlaggedSetEmpty):
        fraction = float(_lookup(evidence, "flagged_fraction").value)
        ok = fraction <= predicate.max_flagged_fraction
        relation = "<=" if ok else ">"
        reason = (
            f"flagged_fraction {_fmt(fraction)} {relation} allowed "
            f"{_fmt(predicate.max_flagged_fraction)}"
        )
    elif isinstance(predicate, RequiredTechniques):
        present = set(_lookup(evidence, "techniques").value or [])
        integrity = _lookup(evidence, "checkpoint_integrity").value
        problems = []
        missing = [t for t in predicate.techniques if t not in present]
        if missing:
            problems.append("missing techniques: " + ", ".join(missing))
        for technique in predicate.techniques:
            if technique in present and technique in TECHNIQUE_STRENGTH:
                strength_name = TECHNIQUE_STRENGTH[technique]
                strength = _lookup(evidence, strength_name).value
                if not isinstance(strength, (int, float)) or not strength > 0:
                    problems.append(f"{technique} declared without positive {strength_name}")
        if integrity != "valid":
            problems.append(f"checkpoint_integrity is {integrity}")
        ok = not problems
        reason = "; ".join(problems) if problems else (
            "techniques present: " + ", ".join(predicate.techniques or ("(none required)",))
            + "; checkpoint trail valid"
        )
    elif isinstance(predicate, MetricThreshold):
        value = _lookup(evidence, predicate.metric).value
        if isinstance(value, bool) or not isinstance(value, (int, float)) or math.isnan(value):
            raise MissingEvidence(f"evidence {predicate.metric!r} is not numeric")
        ok = predicate.holds(float(value))
        relation = predicate.comparator if ok else ("<=" if predicate.comparator == ">" else "<")
        reason = f"{predicate.metric} {_fmt(float(value))} {relation} {_fmt(predicate.threshold)}"
    else:  # pragma: no cover - closed union
        raise TypeError(f"unknown predicate {predicate!r}")

    return FactorOutcome(
        factor=property.factor,
        verdict=Verdict.PASS if ok else Verdict.FAIL,
        evidence=evidence,
        reason=reason,
        spec=property,
    )


def merge_outcomes(
    outcomes: Iterable[FactorOutcome], rule: MergeRule | str = MergeRule.ALL_PASS
) -> Verdict | dict[Factor, Verdict]:
    """Merge per-factor outcomes.

    ``all-pass`` returns the conjunction of all three verdicts. ``per-factor``
    returns a factor -> verdict mapping, each factor standing on its own.
    """
    rule = MergeRule(rule)
    outcomes = list(outcomes)
    verdicts: dict[Factor, Verdict] = {}
    for outcome in outcomes:
        if outcome.factor in verdicts:
            raise DuplicateFactor(f"two outcomes for factor {outcome.factor.value}")
        verdicts[outcome.factor] = outcome.verdict

    if rule is MergeRule.PER_FACTOR:
        return verdicts
    missing = [f.value for f in FACTOR_ORDER if f not in verdicts]
    if missing:
        raise IncompleteOutcomes("all-pass merge lacks factors: " + ", ".join(missing))
    return Verdict.PASS if all(v is Verdict.PASS for v in verdicts.values()) else Verdict.FAIL
