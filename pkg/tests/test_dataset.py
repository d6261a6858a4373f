import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlcert.errors import FractionOutOfRange, InvalidDimensions, MalformedArtifact
from mlcert.target.dataset import (
    BENIGN,
    MALWARE,
    ClusterProfile,
    Dataset,
    dataset_from_csv,
    dataset_to_csv,
    generate_dataset,
    inject_poison,
    load_dataset,
    load_poison_truth,
    malware_profile,
    save_dataset,
    save_poison_truth,
)


def boundary_distance_oracle(ds):
    """Plain-Python distance of each row to the mid-hyperplane between centroids."""
    X, y = ds.features.tolist(), ds.labels.tolist()
    d = len(X[0])
    mal = [sum(r[j] for r, l in zip(X, y) if l == 1) / y.count(1) for j in range(d)]
    ben = [sum(r[j] for r, l in zip(X, y) if l == 0) / y.count(0) for j in range(d)]
    w = [a - b for a, b in zip(mal, ben)]
    norm = math.sqrt(sum(v * v for v in w))
    mid = [(a + b) / 2 for a, b in zip(mal, ben)]
    return [abs(sum((r[j] - mid[j]) * w[j] for j in range(d))) / norm for r in X]


class TestGenerate:
    def test_balanced_counts(self):
        ds = generate_dataset(42, 1000, 8, 2.0)
        assert (ds.labels == BENIGN).sum() == 500 and (ds.labels == MALWARE).sum() == 500

    @pytest.mark.parametrize("n", [2, 3, 7, 101])
    def test_odd_counts(self, n):
        ds = generate_dataset(1, n, 3, 1.0)
        assert (ds.labels == BENIGN).sum() == n // 2
        assert (ds.labels == MALWARE).sum() == n - n // 2

    def test_deterministic_bytes(self):
        a = dataset_to_csv(generate_dataset(42, 300, 8, 2.0))
        b = dataset_to_csv(generate_dataset(42, 300, 8, 2.0))
        assert a == b
        assert a != dataset_to_csv(generate_dataset(43, 300, 8, 2.0))

    @pytest.mark.parametrize("n,d", [(1, 8), (0, 8), (10, 0)])
    def test_invalid_dimensions(self, n, d):
        with pytest.raises(InvalidDimensions):
            generate_dataset(7, n, d, 2.0)

    @pytest.mark.parametrize("profile", [None, "malware"])
    def test_mean_distance(self, profile):
        d, sep = 32, 0.35
        prof = malware_profile(d) if profile else None
        ds = generate_dataset(5, 40000, d, sep, prof)
        gap = ds.features[ds.labels == 1].mean(0) - ds.features[ds.labels == 0].mean(0)
        # sampling error of the gap is about sqrt(2 * sum(noise^2) / 20000)
        assert np.linalg.norm(gap) == pytest.approx(sep * math.sqrt(d), abs=0.06)

    def test_profile_validation(self):
        with pytest.raises(InvalidDimensions):
            ClusterProfile((1.0, 1.0), (1.0,))
        with pytest.raises(InvalidDimensions):
            ClusterProfile((0.0,), (1.0,))
        with pytest.raises(InvalidDimensions):
            generate_dataset(1, 10, 4, 1.0, malware_profile(5))


class TestDatasetType:
    def test_rejects_nan(self):
        with pytest.raises(MalformedArtifact):
            Dataset(np.array([[np.nan]]), np.array([0]))

    def test_rejects_bad_label(self):
        with pytest.raises(MalformedArtifact):
            Dataset(np.zeros((2, 1)), np.array([0, 2]))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(InvalidDimensions):
            Dataset(np.zeros((3, 1)), np.array([0, 1]))

    def test_immutable(self):
        ds = generate_dataset(1, 10, 2, 1.0)
        with pytest.raises(ValueError):
            ds.features[0, 0] = 1.0


class TestPoison:
    def test_flip_count_and_truth(self):
        ds = generate_dataset(42, 1000, 8, 2.0)
        poisoned, truth = inject_poison(ds, 0.1, 3)
        assert len(truth.poisoned_indices) == 50
        changed = np.flatnonzero(poisoned.labels != ds.labels)
        assert changed.tolist() == list(truth.poisoned_indices)
        assert all(v == MALWARE for v in truth.original_labels)
        assert np.all(poisoned.labels[changed] == BENIGN)
        assert np.array_equal(poisoned.features, ds.features)

    def test_rows_nearest_boundary(self):
        ds = generate_dataset(9, 200, 4, 1.0)
        _, truth = inject_poison(ds, 0.2, 0)
        dist = boundary_distance_oracle(ds)
        malware = [i for i in range(ds.n) if ds.labels[i] == 1]
        expected = sorted(sorted(malware, key=lambda i: (dist[i], i))[: len(malware) // 5])
        assert list(truth.poisoned_indices) == expected

    def test_zero_fraction_identity(self):
        ds = generate_dataset(42, 100, 4, 2.0)
        same, truth = inject_poison(ds, 0.0, 1)
        assert same is ds and truth.poisoned_indices == ()

    @pytest.mark.parametrize("fraction", [0.6, -0.1])
    def test_out_of_range(self, fraction):
        with pytest.raises(FractionOutOfRange):
            inject_poison(generate_dataset(1, 10, 2, 1.0), fraction, 0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(4, 80), st.integers(1, 5), st.floats(0, 0.5))
    def test_only_truth_rows_change(self, seed, n, d, fraction):
        ds = generate_dataset(seed, n, d, 1.0)
        poisoned, truth = inject_poison(ds, fraction, seed)
        idx = list(truth.poisoned_indices)
        assert idx == sorted(set(idx)) and all(i < n for i in idx)
        assert len(idx) == math.floor(fraction * (ds.labels == 1).sum())
        assert np.flatnonzero(poisoned.labels != ds.labels).tolist() == idx
        assert np.array_equal(poisoned.features, ds.features)


class TestCsv:
    def test_format(self):
        ds = Dataset(np.array([[0.1, -2.5], [1e-300, 3.0]]), np.array([0, 1]))
        text = dataset_to_csv(ds).decode()
        assert text.splitlines()[0] == "f0,f1,label"
        assert "\r" not in text and text.endswith("\n")
        assert text.splitlines()[1] == "0.10000000000000001,-2.5,0"

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=2, max_size=12))
    def test_round_trip_bit_exact(self, values):
        X = np.array(values[: len(values) // 2 * 2]).reshape(-1, 2)
        ds = Dataset(X, np.arange(X.shape[0]) % 2)
        back = dataset_from_csv(dataset_to_csv(ds))
        assert back.features.tobytes() == ds.features.tobytes()
        assert np.array_equal(back.labels, ds.labels)

    def test_save_load_save(self, tmp_path):
        ds = generate_dataset(3, 50, 5, 1.0)
        save_dataset(ds, tmp_path / "a.csv")
        save_dataset(load_dataset(tmp_path / "a.csv"), tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    @pytest.mark.parametrize("text", [
        b"f0,label\n0.5,2\n",
        b"f0,label\n0.5\n",
        b"f0,label\nabc,1\n",
        b"f0,label\nnan,1\n",
        b"x0,label\n0.5,1\n",
        b"f0,label\n",
        b"",
        "f0,label\n0.5,1é\n".encode(),
    ])
    def test_malformed(self, text):
        with pytest.raises(MalformedArtifact):
            dataset_from_csv(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MalformedArtifact):
            load_dataset(tmp_path / "nope.csv")

    def test_poison_truth_round_trip(self, tmp_path):
        ds = generate_dataset(4, 100, 3, 1.0)
        _, truth = inject_poison(ds, 0.1, 0)
        save_poison_truth(truth, tmp_path / "t.json")
        assert load_poison_truth(tmp_path / "t.json") == truth
        (tmp_path / "bad.json").write_text("{}")
        with pytest.raises(MalformedArtifact):
            load_poison_truth(tmp_path / "bad.json")
