"""Runs the three factor assessments and issues the resulting certificates."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from mlcert.certificate import Certificate, issue_certificate
from mlcert.collectors import run_collector
from mlcert.core import FACTOR_ORDER, FactorOutcome, MergeRule, ThreeFactorCertificationModel, merge_outcomes
from mlcert.util import Clock, system_clock

DEFAULT_ISSUER = "mlcert reference lab"


def reference_config_text() -> str:
    return resources.files("mlcert").joinpath("data/reference.toml").read_text(encoding="utf-8")


def assess_all(cert_model: ThreeFactorCertificationModel, base_dir: str | Path,
               clock: Clock | None = None, *, workers: int = 3) -> list[FactorOutcome]:
    """Assess every factor; results come back in data, process, model order."""
    clock = clock or system_clock
    models = cert_model.models()
    if workers <= 1:
        return [run_collector(cm, base_dir, clock) for cm in models]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_collector, cm, base_dir, clock) for cm in models]
        return [f.result() for f in futures]


@dataclass(frozen=True)
class CertificationRun:
    outcomes: tuple[FactorOutcome, ...]
    certificates: tuple[Certificate, ...]
    merge_rule: MergeRule

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.outcomes)

    @property
    def merged(self):
        return merge_outcomes(list(self.outcomes), self.merge_rule)


def certify(cert_model: ThreeFactorCertificationModel, base_dir: str | Path,
            signing_key: Ed25519PrivateKey, *, issuer: str = DEFAULT_ISSUER,
            clock: Clock | None = None, workers: int = 3) -> CertificationRun:
    clock = clock or system_clock
    outcomes = assess_all(cert_model, base_dir, clock, workers=workers)
    assert [o.factor for o in outcomes] == list(FACTOR_ORDER)
    certs = issue_certificate(outcomes, cert_model.merge_rule, signing_key, issuer, clock,
                              cert_model=cert_model)
    return CertificationRun(tuple(outcomes), tuple(certs), cert_model.merge_rule)
