"""Evidence for the data factor: flag training rows that look poisoned.

A row is suspicious when too few of its nearest neighbours (Euclidean,
brute force, ties to the lower index) carry the same label.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from mlcert.collectors._evidence import read_artifact, records, resolve
from mlcert.core import CertificationModel, Factor, FactorOutcome, evaluate_predicate
from mlcert.errors import FactorMismatch, KTooLarge, MalformedConfig
from mlcert.target.dataset import Dataset, dataset_from_csv
from mlcert.util import Clock, sha256_bytes

DEFAULT_K = 5
DEFAULT_AGREEMENT = 0.5


def neighbor_agreement(ds: Dataset, k: int) -> np.ndarray:
    """Fraction of each row's ``k`` nearest neighbours that share its label."""
    if not 1 <= k < ds.n:
        raise KTooLarge(f"k must satisfy 1 <= k < n = {ds.n}, got {k}")
    X, labels = ds.features, ds.labels
    agreement = np.empty(ds.n)
    for i in range(ds.n):
        dist = np.einsum("ij,ij->i", X - X[i], X - X[i])
        dist[i] = np.inf
        nearest = np.argsort(dist, kind="stable")[:k]
        agreement[i] = np.count_nonzero(labels[nearest] == labels[i]) / k
    return agreement


def flag_poisoned(ds: Dataset, k: int = DEFAULT_K,
                  agreement_threshold: float = DEFAULT_AGREEMENT) -> list[int]:
    if not 0 < agreement_threshold <= 1:
        raise ValueError("agreement_threshold must lie in (0, 1]")
    agreement = neighbor_agreement(ds, k)
    return [int(i) for i in np.flatnonzero(agreement < agreement_threshold)]


def assess_data_factor(cm: CertificationModel, *, base_dir: str | Path | None = None,
                       clock: Clock | None = None) -> FactorOutcome:
    if cm.factor is not Factor.DATA:
        raise FactorMismatch(f"data collector given a {cm.factor.value} model")
    params = cm.collector_params()
    try:
        k = int(params.get("k", DEFAULT_K))
        threshold = float(params.get("agreement_threshold", DEFAULT_AGREEMENT))
    except (TypeError, ValueError) as exc:
        raise MalformedConfig(f"bad data collector parameters: {exc}") from exc

    raw = read_artifact(resolve(cm, base_dir), "dataset")
    ds = dataset_from_csv(raw)
    flagged = flag_poisoned(ds, k, threshold)
    digest = sha256_bytes(raw)
    evidence = records(cm, digest, [
        ("flagged_count", len(flagged)),
        ("flagged_fraction", len(flagged) / ds.n),
        ("flagged_indices", flagged),
        ("dataset_sha256", digest),
    ], clock)
    return evaluate_predicate(cm.property, evidence)

