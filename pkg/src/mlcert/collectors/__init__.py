"""Factor-specific evidence collectors, looked up by procedure id."""

from __future__ import annotations

from pathlib import Path

from mlcert.collectors.data import assess_data_factor, flag_poisoned
from mlcert.collectors.model import (
    assess_model_factor,
    craft_fgsm,
    evaluate_recall,
    load_holdout,
)
from mlcert.collectors.process import (
    assess_process_factor,
    parse_manifest,
    verify_checkpoint_trail,
)
from mlcert.core import CertificationModel, FactorOutcome
from mlcert.errors import UnknownProcedure
from mlcert.util import Clock


def _run_model(cm: CertificationModel, *, base_dir=None, clock=None) -> FactorOutcome:
    holdout, digest = load_holdout(cm, base_dir)
    return assess_model_factor(cm, holdout, base_dir=base_dir, clock=clock, holdout_digest=digest)


COLLECTORS = {
    "knn-label-agreement": assess_data_factor,
    "manifest-inspection": assess_process_factor,
    "fgsm-recall": _run_model,
}


def run_collector(cm: CertificationModel, base_dir: str | Path | None = None,
                  clock: Clock | None = None) -> FactorOutcome:
    try:
        collector = COLLECTORS[cm.evidence.procedure_id]
    except KeyError:
        raise UnknownProcedure(cm.evidence.procedure_id) from None
    return collector(cm, base_dir=base_dir, clock=clock)


__all__ = [
    "COLLECTORS", "run_collector",
    "assess_data_factor", "flag_poisoned",
    "assess_process_factor", "parse_manifest", "verify_checkpoint_trail",
    "assess_model_factor", "craft_fgsm", "evaluate_recall", "load_holdout",
]
