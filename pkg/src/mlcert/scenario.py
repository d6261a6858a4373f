"""Builders for the demo targets: baseline, hardened and poisoned detectors.

Each scenario writes a target directory with ``dataset.csv``, ``holdout.csv``,
``manifest.json``, ``checkpoints/`` and ``model.json``. The poisoned scenario
also writes ``poison_truth.json`` next to (never inside) the target directory.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from mlcert.target.dataset import (
    Dataset,
    PoisonGroundTruth,
    generate_dataset,
    inject_poison,
    malware_profile,
    save_dataset,
    save_poison_truth,
)
from mlcert.target.training import AdversarialConfig, SmoothingConfig, TrainConfig, train_mlp

SCENARIOS = ("baseline", "hardened", "poisoned")


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    n_train: int = 2000
    n_holdout: int = 1000
    d: int = 32
    class_separation: float = 0.35
    poison_fraction: float = 0.0
    defended: bool = False
    sigma: float = 0.3
    epsilon: float = 0.3
    adv_fraction: float = 0.5


def scenario_spec(name: str) -> ScenarioSpec:
    if name == "baseline":
        return ScenarioSpec(name)
    if name == "hardened":
        return ScenarioSpec(name, defended=True)
    if name == "poisoned":
        return ScenarioSpec(name, poison_fraction=0.1)
    raise ValueError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")


def derive_seed(seed: int, stream: str) -> int:
    """Independent 32-bit seed per named stream, stable across platforms."""
    ss = np.random.SeedSequence([seed, int.from_bytes(stream.encode(), "big")])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def demo_key_seed(seed: int) -> bytes:
    """Deterministic 32-byte signing seed for demo runs without ``--key``.

    Demo keys are reproducible by design and must not be used for real issuance.
    """
    return hashlib.sha256(f"mlcert-demo-issuer:{seed}".encode()).digest()


@dataclass(frozen=True)
class BuiltScenario:
    spec: ScenarioSpec
    target_dir: Path
    train: Dataset
    holdout: Dataset
    truth: PoisonGroundTruth | None
    truth_path: Path | None


def train_config(spec: ScenarioSpec, seed: int) -> TrainConfig:
    cfg = TrainConfig(seed=derive_seed(seed, "training"))
    if spec.defended:
        cfg = replace(
            cfg,
            randomized_smoothing=SmoothingConfig(sigma=spec.sigma),
            adversarial_training=AdversarialConfig(epsilon=spec.epsilon, adv_fraction=spec.adv_fraction),
        )
    return cfg


def build_scenario(name: str | ScenarioSpec, out_dir: str | os.PathLike[str], seed: int = 42) -> BuiltScenario:
    spec = scenario_spec(name) if isinstance(name, str) else name
    out_dir = Path(out_dir)
    target = out_dir / "target"
    profile = malware_profile(spec.d)

    train = generate_dataset(derive_seed(seed, "train"), spec.n_train, spec.d, spec.class_separation, profile)
    holdout = generate_dataset(derive_seed(seed, "holdout"), spec.n_holdout, spec.d, spec.class_separation, profile)
    truth = truth_path = None
    if spec.poison_fraction > 0:
        train, truth = inject_poison(train, spec.poison_fraction, derive_seed(seed, "poison"))
        truth_path = out_dir / "poison_truth.json"
        save_poison_truth(truth, truth_path)

    save_dataset(train, target / "dataset.csv")
    save_dataset(holdout, target / "holdout.csv")
    train_mlp(train, train_config(spec, seed), target)
    return BuiltScenario(spec, target, train, holdout, truth, truth_path)
