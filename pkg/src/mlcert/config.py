"""Parsing of three-factor certification model configs (TOML).

Layout::

    merge_rule = "all-pass"

    [factor.data]
    target = { artifact_path = "dataset.csv", artifact_kind = "dataset" }

    [factor.data.property]
    name = "robustness-inference-attacks"
    predicate = { kind = "flagged-set-empty", max_flagged_fraction = 0.0 }
    verification_means = { detector = "knn-label-agreement" }

    [factor.data.evidence]
    procedure_id = "knn-label-agreement"
    seed = 42
    parameters = { k = 5, agreement_threshold = 0.5 }

``factor.process`` and ``factor.model`` follow the same shape. Any of the
``property``/``target``/``evidence`` tables may restate ``factor``; it must
agree with the section it sits in. Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import sys
from collections.abc import Mapping
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from mlcert.core import (
    FACTOR_ORDER,
    CertificationModel,
    EvidenceCollectionSpec,
    Factor,
    FlaggedSetEmpty,
    MergeRule,
    MetricThreshold,
    PropertySpec,
    RequiredTechniques,
    TargetDescriptor,
    ThreeFactorCertificationModel,
)
from mlcert.errors import CertError, FactorMismatch, MalformedConfig

_PREDICATE_KEYS = {
    "flagged-set-empty": ({"max_flagged_fraction"}, set()),
    "required-techniques": ({"techniques"}, {"techniques"}),
    "metric-threshold": ({"metric", "comparator", "threshold"}, {"threshold"}),
}


def _table(raw: Any, where: str) -> Mapping[str, Any]:
    if not isinstance(raw, Mapping):
        raise MalformedConfig(f"{where} must be a table")
    return raw


def _check_keys(raw: Mapping[str, Any], where: str, allowed: set[str], required: set[str]) -> None:
    unknown = set(raw) - allowed
    if unknown:
        raise MalformedConfig(f"{where}: unknown keys {sorted(unknown)}")
    absent = required - set(raw)
    if absent:
        raise MalformedConfig(f"{where}: missing keys {sorted(absent)}")


def _scalars(raw: Any, where: str) -> dict[str, Any]:
    raw = _table(raw, where)
    for key, value in raw.items():
        if isinstance(value, (Mapping, list)):
            raise MalformedConfig(f"{where}.{key} must be a scalar")
    return dict(raw)


def _own_factor(raw: Mapping[str, Any], section: Factor, where: str) -> Factor:
    declared = raw.get("factor", section.value)
    try:
        declared = Factor(declared)
    except ValueError:
        raise MalformedConfig(f"{where}: unknown factor {declared!r}") from None
    if declared is not section:
        raise FactorMismatch(f"{where} declares factor {declared.value} inside [factor.{section.value}]")
    return declared


def _parse_predicate(raw: Any, where: str):
    raw = _table(raw, where)
    kind = raw.get("kind")
    if kind not in _PREDICATE_KEYS:
        raise MalformedConfig(f"{where}: unknown predicate kind {kind!r}")
    allowed, required = _PREDICATE_KEYS[kind]
    params = {k: v for k, v in raw.items() if k != "kind"}
    _check_keys(params, where, allowed, required)
    try:
        if kind == "flagged-set-empty":
            return FlaggedSetEmpty(**params)
        if kind == "required-techniques":
            if not isinstance(params["techniques"], list):
                raise MalformedConfig(f"{where}.techniques must be a list")
            return RequiredTechniques(tuple(params["techniques"]))
        return MetricThreshold(**params)
    except TypeError as exc:
        raise MalformedConfig(f"{where}: {exc}") from exc


def _parse_factor(raw: Any, factor: Factor, default_seed: int | None) -> CertificationModel:
    where = f"factor.{factor.value}"
    raw = _table(raw, where)
    _check_keys(raw, where, {"property", "target", "evidence"}, {"property", "target", "evidence"})

    prop = _table(raw["property"], f"{where}.property")
    _check_keys(
        prop, f"{where}.property",
        {"name", "factor", "predicate", "verification_means"},
        {"name", "predicate", "verification_means"},
    )
    target = _table(raw["target"], f"{where}.target")
    _check_keys(
        target, f"{where}.target",
        {"factor", "artifact_path", "artifact_kind"}, {"artifact_path", "artifact_kind"},
    )
    evidence = _table(raw["evidence"], f"{where}.evidence")
    _check_keys(
        evidence, f"{where}.evidence",
        {"factor", "procedure_id", "parameters", "seed"}, {"procedure_id"},
    )

    seed = evidence.get("seed", default_seed)
    if seed is None:
        raise MalformedConfig(f"{where}.evidence: no seed given")

    try:
        return CertificationModel(
            property=PropertySpec(
                name=prop["name"],
                factor=_own_factor(prop, factor, f"{where}.property"),
                predicate=_parse_predicate(prop["predicate"], f"{where}.property.predicate"),
                verification_means=_scalars(
                    prop["verification_means"], f"{where}.property.verification_means"
                ),
            ),
            target=TargetDescriptor(
                factor=_own_factor(target, factor, f"{where}.target"),
                artifact_path=str(target["artifact_path"]),
                artifact_kind=target["artifact_kind"],
            ),
            evidence=EvidenceCollectionSpec(
                factor=_own_factor(evidence, factor, f"{where}.evidence"),
                procedure_id=evidence["procedure_id"],
                parameters=_scalars(evidence.get("parameters", {}), f"{where}.evidence.parameters"),
                seed=seed,
            ),
        )
    except ValueError as exc:
        # enum coercion failures (bad artifact_kind etc.) surface as plain ValueError
        if isinstance(exc, CertError):
            raise
        raise MalformedConfig(f"{where}: {exc}") from exc


def parse_certification_model(
    config_text: str, *, default_seed: int | None = None
) -> ThreeFactorCertificationModel:
    """Parse and validate a three-factor certification model.

    ``default_seed`` fills in evidence sections that omit ``seed``.
    """
    try:
        raw = tomllib.loads(config_text)
    except tomllib.TOMLDecodeError as exc:
        raise MalformedConfig(f"invalid TOML: {exc}") from exc

    _check_keys(raw, "config", {"merge_rule", "factor"}, {"factor"})
    factors = _table(raw["factor"], "factor")
    _check_keys(factors, "factor", {f.value for f in FACTOR_ORDER}, {f.value for f in FACTOR_ORDER})

    try:
        rule = MergeRule(raw.get("merge_rule", MergeRule.ALL_PASS.value))
    except ValueError:
        raise MalformedConfig(f"unknown merge_rule {raw.get('merge_rule')!r}") from None

    data, process, model = (
        _parse_factor(factors[f.value], f, default_seed) for f in FACTOR_ORDER
    )
    return ThreeFactorCertificationModel(data=data, process=process, model=model, merge_rule=rule)
