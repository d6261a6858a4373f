import json
import shutil

import pytest

from conftest import make_cm
from mlcert.collectors.process import (
    assess_process_factor,
    manifest_from_bytes,
    parse_manifest,
    verify_checkpoint_trail,
)
from mlcert.core import Factor, Verdict
from mlcert.errors import FactorMismatch, MalformedArtifact, UnknownTechnique
from mlcert.target.dataset import generate_dataset
from mlcert.target.mlp import MlpModel, model_to_json
from mlcert.target.training import AdversarialConfig, SmoothingConfig, TrainConfig, train_mlp
from mlcert.util import sha256_bytes

BOTH = dict(randomized_smoothing=SmoothingConfig(0.3), adversarial_training=AdversarialConfig(0.3, 0.5))


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    ds = generate_dataset(5, 200, 4, 2.0)
    root = tmp_path_factory.mktemp("trained")
    train_mlp(ds, TrainConfig(epochs=3), root / "baseline")
    train_mlp(ds, TrainConfig(epochs=3, **BOTH), root / "hardened")
    return root


@pytest.fixture
def hardened_copy(trained, tmp_path):
    return shutil.copytree(trained / "hardened", tmp_path / "h")


def cm():
    return make_cm(Factor.PROCESS, "manifest.json")


def rewrite_manifest(directory, mutate):
    path = directory / "manifest.json"
    raw = json.loads(path.read_bytes())
    mutate(raw)
    path.write_text(json.dumps(raw))


class TestParse:
    def test_hardened_manifest(self, trained):
        m = parse_manifest(trained / "hardened" / "manifest.json")
        assert m.techniques == ("randomized_smoothing", "adversarial_training")

    def test_unknown_technique(self, hardened_copy):
        rewrite_manifest(hardened_copy, lambda r: r.update(techniques=["quantum_annealing"]))
        with pytest.raises(UnknownTechnique):
            parse_manifest(hardened_copy / "manifest.json")

    @pytest.mark.parametrize("blob", [b"", b"  \n", b"{", b"[]", b"null"])
    def test_malformed(self, blob):
        with pytest.raises(MalformedArtifact):
            manifest_from_bytes(blob)

    def test_missing(self, tmp_path):
        with pytest.raises(MalformedArtifact):
            parse_manifest(tmp_path / "manifest.json")


class TestTrail:
    def test_untouched_valid(self, trained):
        m = parse_manifest(trained / "hardened" / "manifest.json")
        report = verify_checkpoint_trail(m, trained / "hardened")
        assert report.valid and report.problems() == []
        assert [f for f, _ in report.files] == [c.file for c in m.checkpoints]

    def test_flipped_byte(self, hardened_copy):
        target = hardened_copy / "checkpoints" / "epoch_2.json"
        blob = bytearray(target.read_bytes())
        blob[40] ^= 0x01
        target.write_bytes(bytes(blob))
        report = verify_checkpoint_trail(parse_manifest(hardened_copy / "manifest.json"), hardened_copy)
        assert not report.valid
        assert report.problems() == ["checkpoints/epoch_2.json: digest mismatch"]

    def test_deleted(self, hardened_copy):
        (hardened_copy / "checkpoints" / "epoch_1.json").unlink()
        report = verify_checkpoint_trail(parse_manifest(hardened_copy / "manifest.json"), hardened_copy)
        assert not report.valid and "checkpoints/epoch_1.json: missing" in report.problems()

    def test_wrong_architecture(self, hardened_copy):
        blob = model_to_json(MlpModel.zeros((4, 3, 1)))
        (hardened_copy / "checkpoints" / "epoch_1.json").write_bytes(blob)
        rewrite_manifest(hardened_copy, lambda r: r["checkpoints"][0].update(sha256=sha256_bytes(blob)))
        report = verify_checkpoint_trail(parse_manifest(hardened_copy / "manifest.json"), hardened_copy)
        assert not report.valid and "layer dims" in report.problems()[0]

    def test_unparseable_with_matching_digest(self, hardened_copy):
        blob = b"not a model"
        (hardened_copy / "checkpoints" / "epoch_3.json").write_bytes(blob)
        rewrite_manifest(hardened_copy, lambda r: r["checkpoints"][2].update(sha256=sha256_bytes(blob)))
        report = verify_checkpoint_trail(parse_manifest(hardened_copy / "manifest.json"), hardened_copy)
        assert not report.valid and "unparseable" in report.problems()[0]

    def test_path_escape(self, hardened_copy):
        rewrite_manifest(hardened_copy, lambda r: r["checkpoints"][0].update(file="../outside.json"))
        report = verify_checkpoint_trail(parse_manifest(hardened_copy / "manifest.json"), hardened_copy)
        assert not report.valid

    def test_no_checkpoints(self, hardened_copy):
        rewrite_manifest(hardened_copy, lambda r: r.update(checkpoints=[]))
        report = verify_checkpoint_trail(parse_manifest(hardened_copy / "manifest.json"), hardened_copy)
        assert not report.valid

    def test_epochs_out_of_order(self, hardened_copy):
        rewrite_manifest(hardened_copy, lambda r: r.update(checkpoints=r["checkpoints"][::-1]))
        report = verify_checkpoint_trail(parse_manifest(hardened_copy / "manifest.json"), hardened_copy)
        assert not report.valid


class TestAssess:
    def test_baseline_fails_citing_techniques(self, trained, clock):
        out = assess_process_factor(cm(), base_dir=trained / "baseline", clock=clock)
        assert out.verdict is Verdict.FAIL
        assert "randomized_smoothing" in out.reason and "adversarial_training" in out.reason
        ev = {r.name: r.value for r in out.evidence}
        assert ev["techniques"] == [] and ev["sigma"] is None and ev["epsilon"] is None

    def test_hardened_passes(self, trained, clock):
        out = assess_process_factor(cm(), base_dir=trained / "hardened", clock=clock)
        assert out.verdict is Verdict.PASS
        ev = {r.name: r.value for r in out.evidence}
        assert ev["sigma"] == 0.3 and ev["epsilon"] == 0.3 and ev["checkpoint_integrity"] == "valid"
        digest = sha256_bytes((trained / "hardened" / "manifest.json").read_bytes())
        assert ev["manifest_sha256"] == digest
        assert {r.artifact_digest for r in out.evidence} == {digest}

    def test_hardened_tampered_fails(self, hardened_copy, clock):
        target = hardened_copy / "checkpoints" / "epoch_3.json"
        target.write_bytes(target.read_bytes().replace(b"1", b"2", 1))
        out = assess_process_factor(cm(), base_dir=hardened_copy, clock=clock)
        assert out.verdict is Verdict.FAIL
        assert {r.name: r.value for r in out.evidence}["checkpoint_integrity"] == "invalid"

    def test_zero_strength_declared(self, hardened_copy, clock):
        def zero(raw):
            raw["hyperparameters"]["randomized_smoothing"]["sigma"] = 0.0
        rewrite_manifest(hardened_copy, zero)
        out = assess_process_factor(cm(), base_dir=hardened_copy, clock=clock)
        assert out.verdict is Verdict.FAIL and "sigma" in out.reason

    def test_location_independent(self, trained, tmp_path, clock):
        copy = shutil.copytree(trained / "hardened", tmp_path / "elsewhere")
        assert assess_process_factor(cm(), base_dir=copy, clock=clock) == \
            assess_process_factor(cm(), base_dir=trained / "hardened", clock=clock)

    def test_monotone_in_techniques(self, trained, tmp_path, clock):
        # a manifest that only declares one technique gains a pass once the second is added
        copy = shutil.copytree(trained / "hardened", tmp_path / "m")
        rewrite_manifest(copy, lambda r: r.update(techniques=["adversarial_training"]))
        partial = assess_process_factor(cm(), base_dir=copy, clock=clock)
        rewrite_manifest(copy, lambda r: r.update(techniques=["adversarial_training", "randomized_smoothing"]))
        full = assess_process_factor(cm(), base_dir=copy, clock=clock)
        assert not partial.passed and full.passed

    def test_wrong_factor(self):
        with pytest.raises(FactorMismatch):
            assess_process_factor(make_cm(Factor.DATA, "dataset.csv"))

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(MalformedArtifact):
            assess_process_factor(cm(), base_dir=tmp_path)

