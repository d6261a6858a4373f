from __future__ import annotations

from datetime import datetime, timezone

import pytest

from mlcert.certificate import signing_key_from_seed
from mlcert.config import parse_certification_model
from mlcert.core import (
    CertificationModel,
    EvidenceCollectionSpec,
    EvidenceRecord,
    Factor,
    FlaggedSetEmpty,
    MetricThreshold,
    PropertySpec,
    RequiredTechniques,
    TargetDescriptor,
)
from mlcert.engine import reference_config_text
from mlcert.scenario import build_scenario
from mlcert.util import fixed_clock

GOLDEN_SEED = 42
FIXED_TS = "2024-05-01T12:00:00Z"
DIGEST = "ab" * 32

_ACCEPTANCE_LINES: list[str] = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _ACCEPTANCE_LINES.extend(
            line for line in report.capstdout.splitlines() if line[:2] in {f"A{i}" for i in range(1, 9)}
        )


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def clock():
    return fixed_clock(datetime(2024, 5, 1, 12, 0, 0, tzinfo=timezone.utc))


@pytest.fixture(scope="session")
def signing_key():
    return signing_key_from_seed(bytes(range(32)))


@pytest.fixture(scope="session")
def reference_model():
    return parse_certification_model(reference_config_text(), default_seed=GOLDEN_SEED)


@pytest.fixture(scope="session")
def baseline(tmp_path_factory):
    return build_scenario("baseline", tmp_path_factory.mktemp("baseline"), GOLDEN_SEED)


@pytest.fixture(scope="session")
def hardened(tmp_path_factory):
    return build_scenario("hardened", tmp_path_factory.mktemp("hardened"), GOLDEN_SEED)


@pytest.fixture(scope="session")
def poisoned(tmp_path_factory):
    return build_scenario("poisoned", tmp_path_factory.mktemp("poisoned"), GOLDEN_SEED)


def record(factor: Factor, name: str, value, digest: str = DIGEST) -> EvidenceRecord:
    return EvidenceRecord(factor, name, value, digest, {}, FIXED_TS)


def data_property(max_fraction: float = 0.0) -> PropertySpec:
    return PropertySpec("robustness-inference-attacks", Factor.DATA,
                        FlaggedSetEmpty(max_fraction), {"detector": "knn-label-agreement"})


def process_property(techniques=("randomized_smoothing", "adversarial_training")) -> PropertySpec:
    return PropertySpec("robustness-inference-attacks", Factor.PROCESS,
                        RequiredTechniques(tuple(techniques)), {"inspection": "manifest"})


def model_property(threshold: float = 0.95, comparator: str = ">") -> PropertySpec:
    return PropertySpec("robustness-inference-attacks", Factor.MODEL,
                        MetricThreshold(threshold, comparator=comparator),
                        {"attack": "fgsm", "epsilon": 0.3})


def make_cm(factor: Factor, path: str, params=None, seed: int = GOLDEN_SEED, prop=None) -> CertificationModel:
    kinds = {Factor.DATA: "dataset", Factor.PROCESS: "manifest", Factor.MODEL: "model"}
    procs = {Factor.DATA: "knn-label-agreement", Factor.PROCESS: "manifest-inspection",
             Factor.MODEL: "fgsm-recall"}
    props = {Factor.DATA: data_property, Factor.PROCESS: process_property, Factor.MODEL: model_property}
    return CertificationModel(
        property=prop or props[factor](),
        target=TargetDescriptor(factor, path, kinds[factor]),
        evidence=EvidenceCollectionSpec(factor, procs[factor], params or {}, seed),
    )
