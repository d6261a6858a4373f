"""Evidence for the model factor: recall of the detector on FGSM-perturbed malware."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from mlcert.collectors._evidence import read_artifact, records, resolve
from mlcert.core import CertificationModel, Factor, FactorOutcome, evaluate_predicate
from mlcert.errors import EmptySampleSet, FactorMismatch, MalformedConfig
from mlcert.target.dataset import MALWARE, Dataset, dataset_from_csv
from mlcert.target.mlp import MlpModel, classify, fgsm_batch, model_from_json
from mlcert.util import sha256_bytes

ATTACKS = ("fgsm",)
DEFAULT_HOLDOUT = "holdout.csv"


def within_budget(x: np.ndarray, x_adv: np.ndarray, epsilon: float) -> bool:
    return bool(np.all(np.abs(np.asarray(x_adv) - np.asarray(x)) <= epsilon))


def craft_fgsm(m: MlpModel, x, y: int, epsilon: float) -> np.ndarray:
    """``x + eps * sign(d loss / d x)``; zero-gradient coordinates stay put."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a feature vector, got shape {x.shape}")
    return fgsm_batch(m, x, [y], epsilon)[0]


def evaluate_recall(m: MlpModel, samples: Iterable[tuple[Sequence[float], int]]) -> float:
    """Share of malware samples the model still labels as malware."""
    samples = list(samples)
    if not samples:
        raise EmptySampleSet("recall needs at least one sample")
    if any(label != MALWARE for _, label in samples):
        raise ValueError("recall is defined over malware samples only")
    X = np.array([np.asarray(x, dtype=np.float64) for x, _ in samples])
    return float(np.mean(classify(m, X)))


def select_malware(holdout: Dataset, n_samples: int, seed: int) -> np.ndarray:
    """Seeded choice of ``n_samples`` malware rows, returned in index order."""
    malware = holdout.malware_indices()
    if n_samples < 1 or malware.size == 0:
        raise EmptySampleSet("no malware rows to attack")
    if malware.size < n_samples:
        raise EmptySampleSet(f"holdout has {malware.size} malware rows, {n_samples} requested")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(malware, size=n_samples, replace=False))


def attack_params(cm: CertificationModel) -> tuple[str, float, int, str]:
    params = cm.collector_params()
    attack = params.get("attack", "fgsm")
    if attack not in ATTACKS:
        raise MalformedConfig(f"unsupported attack {attack!r}")
    try:
        epsilon = float(params["epsilon"])
        n_samples = int(params.get("n_samples", 200))
    except KeyError:
        raise MalformedConfig("model factor needs an attack epsilon") from None
    except (TypeError, ValueError) as exc:
        raise MalformedConfig(f"bad attack parameters: {exc}") from exc
    if epsilon < 0:
        raise MalformedConfig("epsilon must be non-negative")
    return attack, epsilon, n_samples, str(params.get("holdout", DEFAULT_HOLDOUT))


def assess_model_factor(cm: CertificationModel, holdout: Dataset, *,
                        base_dir: str | Path | None = None, clock=None,
                        holdout_digest: str | None = None) -> FactorOutcome:
    if cm.factor is not Factor.MODEL:
        raise FactorMismatch(f"model collector given a {cm.factor.value} model")
    attack, epsilon, n_samples, _ = attack_params(cm)
    raw = read_artifact(resolve(cm, base_dir), "model")
    model = model_from_json(raw)

    rows = select_malware(holdout, n_samples, cm.evidence.seed)
    X = holdout.features[rows]
    X_adv = fgsm_batch(model, X, np.ones(len(rows)), epsilon)
    for i in range(len(rows)):
        if not within_budget(X[i], X_adv[i], epsilon):
            raise AssertionError(f"adversarial sample for row {rows[i]} exceeds the L-inf budget")

    clean = classify(model, X)
    detected = classify(model, X_adv)
    verdict_bits = "".join("1" if v else "0" for v in detected)
    digest = sha256_bytes(raw)
    items = [
        ("recall", float(np.mean(detected))),
        ("clean_recall", float(np.mean(clean))),
        ("attack", attack),
        ("epsilon", epsilon),
        ("n_samples", int(len(rows))),
        ("max_perturbation", float(np.max(np.abs(X_adv - X))) if len(rows) else 0.0),
        ("sample_indices_sha256", sha256_bytes(",".join(str(int(r)) for r in rows).encode())),
        ("per_sample_verdicts_sha256", sha256_bytes(verdict_bits.encode())),
        ("model_sha256", digest),
    ]
    if holdout_digest is not None:
        items.append(("holdout_sha256", holdout_digest))
    evidence = records(cm, digest, items, clock)
    return evaluate_predicate(cm.property, evidence)


def load_holdout(cm: CertificationModel, base_dir: str | Path | None) -> tuple[Dataset, str]:
    _, _, _, rel = attack_params(cm)
    path = Path(rel)
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    raw = read_artifact(path, "holdout dataset")
    return dataset_from_csv(raw), sha256_bytes(raw)
