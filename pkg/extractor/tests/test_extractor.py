"""Extractor output must be loadable and trainable by the dsal package.

dsal is imported here only as the validation oracle for the files this
package writes; the packages share no code, just the formats.
"""

import json

import numpy as np
import pytest

from dsal.evaluation import run_protocol
from dsal.learner import LearnerConfig
from dsal.store import load_manifest, load_phase

from dsal_extract import ExtractionSpec, extract, split_classes
from dsal_extract.cli import main


def fake_spec(out_dir, **overrides):
    base = dict(
        dataset="fake", backbone="resnet18", out_dir=out_dir,
        base_fraction=0.5, phases=2, preprocessing="none", seed=4,
        pretrained=False, batch_size=32,
        fake_classes=8, fake_train=96, fake_test=64, fake_image_size=32,
    )
    base.update(overrides)
    return ExtractionSpec(**base)


@pytest.fixture(scope="module")
def extracted(tmp_path_factory):
    out = tmp_path_factory.mktemp("features")
    summary = extract(fake_spec(out))
    return out, summary


def test_outputs_load_under_dsal(extracted):
    out, summary = extracted
    assert summary["classes_per_phase"] == [4, 2, 2]
    assert summary["feature_width"] == 512
    for split in ("train", "test"):
        manifest = load_manifest(summary["manifests"][split])
        assert len(manifest.phases) == 3
        seen = set()
        total = 0
        for i in range(3):
            phase = load_phase(manifest, i)  # validates labels and row counts
            assert phase.d_cnn == 512
            seen |= set(phase.class_set)
            total += phase.n_samples
        assert seen == set(range(8))
        assert total == (96 if split == "train" else 64)


def test_extracted_features_train_end_to_end(extracted):
    out, summary = extracted
    train = load_manifest(summary["manifests"]["train"])
    test = load_manifest(summary["manifests"]["test"])
    _, report = run_protocol(LearnerConfig(d_buffer=64, seed=1), train, test)
    assert len(report.per_phase) == 3
    assert 0.0 <= report.last_accuracy <= 100.0


def test_rerun_is_byte_identical(tmp_path):
    extract(fake_spec(tmp_path / "a"))
    extract(fake_spec(tmp_path / "b"))
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names  # embeddings, labels, and manifests for both splits
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes(), name


def test_base_fraction_one_gives_single_phase(tmp_path):
    summary = extract(fake_spec(tmp_path, base_fraction=1.0, phases=0))
    assert summary["classes_per_phase"] == [8]
    manifest = load_manifest(summary["manifests"]["train"])
    assert len(manifest.phases) == 1
    assert set(manifest.phases[0].classes) == set(range(8))


def test_uneven_phase_split_is_rejected(tmp_path):
    with pytest.raises(ValueError, match="evenly"):
        extract(fake_spec(tmp_path, phases=3))  # 4 left over, 3 phases


def test_invalid_requests(tmp_path):
    with pytest.raises(ValueError, match="base_fraction"):
        fake_spec(tmp_path, base_fraction=0.0)
    with pytest.raises(ValueError, match="backbone"):
        extract(fake_spec(tmp_path, backbone="vgg-nope"))
    with pytest.raises(ValueError, match="preprocessing"):
        extract(fake_spec(tmp_path, preprocessing="fancy"))
    with pytest.raises(ValueError, match="dataset"):
        extract(fake_spec(tmp_path, dataset="mnist"))


def test_split_classes_properties():
    a = split_classes(100, 0.5, 5, seed=3)
    b = split_classes(100, 0.5, 5, seed=3)
    c = split_classes(100, 0.5, 5, seed=4)
    assert a == b
    assert a != c
    assert [len(ids) for ids in a] == [50, 10, 10, 10, 10, 10]
    flat = [i for ids in a for i in ids]
    assert sorted(flat) == list(range(100))  # disjoint cover


def test_cli_roundtrip(tmp_path, capsys):
    code = main([
        "--dataset", "fake", "--out", str(tmp_path), "--phases", "2",
        "--no-pretrained", "--preprocessing", "none", "--seed", "4",
        "--fake-classes", "8", "--fake-train", "48", "--fake-test", "24",
        "--batch-size", "32",
    ])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["classes_per_phase"] == [4, 2, 2]
    assert (tmp_path / "train_manifest.json").exists()
    assert main([
        "--dataset", "fake", "--out", str(tmp_path), "--phases", "3",
        "--no-pretrained", "--preprocessing", "none",
    ]) == 2


def test_train_and_test_share_the_class_split(extracted):
    out, summary = extracted
    train = load_manifest(summary["manifests"]["train"])
    test = load_manifest(summary["manifests"]["test"])
    for ptr, pte in zip(train.phases, test.phases):
        assert ptr.classes == pte.classes


def test_row_grouping_matches_assignment_order(extracted):
    out, summary = extracted
    manifest = load_manifest(summary["manifests"]["train"])
    phase = load_phase(manifest, 0)
    order = summary["phase_classes"][0]
    # labels appear as contiguous class blocks in assignment order
    boundaries = [lbl for lbl in phase.labels]
    expected = [c for c in order for _ in range(int(np.sum(phase.labels == c)))]
    assert boundaries == expected
