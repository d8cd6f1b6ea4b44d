"""Protocol metrics: per-phase accuracy, averages, base/novel split, sweeps."""

import csv
import json

import numpy as np
import pytest

from dsal.errors import ManifestError
from dsal.evaluation import (
    accuracy_percent,
    evaluate_cumulative,
    run_protocol,
    sweep_comp_ratio,
    write_report_csv,
    write_report_json,
)
from dsal.learner import LearnerConfig
from dsal.oracle import JointProblem, joint_solve
from dsal.buffer import activate_main
from dsal.learner import classify_scores
from dsal.store import (
    PhaseEntry,
    PhaseManifest,
    SyntheticSpec,
    generate_synthetic,
    load_phase,
    one_hot,
)

CFG = LearnerConfig(d_buffer=64, seed=1)


def test_accuracy_percent_examples():
    four = np.array([0, 1, 2, 3])
    assert accuracy_percent(four, four) == 100.0
    assert accuracy_percent(np.array([0, 1, 2, 9]), four) == 75.0
    # predictions naming a class absent from the test data are all wrong
    assert accuracy_percent(np.full(4, 7), four) == 0.0
    with pytest.raises(ValueError):
        accuracy_percent(np.zeros(0), np.zeros(0))


def test_base_only_protocol(tmp_path):
    spec = SyntheticSpec(classes=6, per_class=15, d_cnn=8, seed=4, test_per_class=5)
    train, test = generate_synthetic(spec, tmp_path)
    _, report = run_protocol(CFG, train, test)
    assert len(report.per_phase) == 1
    assert report.average_accuracy == report.last_accuracy
    assert report.average_accuracy == report.per_phase[0].accuracy
    assert report.novel_accuracy is None
    assert report.base_accuracy == report.last_accuracy


def test_average_is_mean_of_curve(small_dataset):
    train, test = small_dataset
    _, report = run_protocol(CFG, train, test)
    assert abs(report.average_accuracy - np.mean(report.per_phase_accuracy)) < 1e-12
    assert 0.0 <= min(report.per_phase_accuracy) <= max(report.per_phase_accuracy) <= 100.0
    assert report.last_accuracy == report.per_phase[-1].accuracy


def test_base_novel_weighted_average(small_dataset):
    train, test = small_dataset
    _, report = run_protocol(CFG, train, test)
    last = report.per_phase[-1]
    base_classes = set(test.phases[0].classes)
    n_base = sum(
        np.isin(load_phase(test, k).labels, sorted(base_classes)).sum()
        for k in range(len(test.phases))
    )
    n_novel = last.n_test - n_base
    blended = (last.base_accuracy * n_base + last.novel_accuracy * n_novel) / last.n_test
    assert abs(blended - last.accuracy) < 1e-9


def test_phase_split_does_not_change_main_stream_decisions(tmp_path):
    # same rows, same buffer, different phase granularity
    common = dict(classes=20, per_class=12, d_cnn=10, seed=9, test_per_class=6)
    coarse_train, coarse_test = generate_synthetic(
        SyntheticSpec(phases=2, **common), tmp_path / "k2"
    )
    fine_train, fine_test = generate_synthetic(
        SyntheticSpec(phases=10, **common), tmp_path / "k10"
    )
    config = LearnerConfig(d_buffer=48, seed=2, enable_dac=False)
    _, coarse = run_protocol(config, coarse_train, coarse_test)
    _, fine = run_protocol(config, fine_train, fine_test)
    assert coarse.last_accuracy == fine.last_accuracy
    # cumulative test sets align where the class frontiers match
    frontier = {10: 0, 15: 1, 20: 2}  # classes seen -> coarse phase index
    seen = 10
    for result in fine.per_phase:
        if seen in frontier:
            assert result.accuracy == coarse.per_phase[frontier[seen]].accuracy
        seen += 1


def test_well_separated_run_beats_95(tmp_path):
    spec = SyntheticSpec(
        classes=10, per_class=20, d_cnn=12, spread=0.05, seed=6, phases=5,
        test_per_class=10,
    )
    train, test = generate_synthetic(spec, tmp_path)
    state, report = run_protocol(CFG, train, test)
    assert report.average_accuracy >= 95.0
    # the joint ridge solve confirms the data itself is this easy
    blocks = [load_phase(train, k) for k in range(len(train.phases))]
    x = activate_main(state.buffer, np.vstack([b.embeddings for b in blocks]))
    y = one_hot(
        np.concatenate([b.labels for b in blocks]), state.class_registry
    )
    joint = joint_solve(JointProblem(x, y, CFG.gamma))
    test_blocks = [load_phase(test, k) for k in range(len(test.phases))]
    tx = activate_main(state.buffer, np.vstack([b.embeddings for b in test_blocks]))
    truth = np.concatenate([b.labels for b in test_blocks])
    joint_acc = accuracy_percent(classify_scores(tx @ joint, state.class_registry), truth)
    assert joint_acc >= 95.0


def test_sweep_ratio_zero_equals_main_only(small_dataset):
    train, test = small_dataset
    state, _ = run_protocol(CFG, train, test)
    rows = sweep_comp_ratio(state, test, [0.0, 0.0, 0.6])
    base_classes = frozenset(test.phases[0].classes)
    main_only = evaluate_cumulative(
        state, test, len(test.phases) - 1, base_classes, comp_ratio=0.0
    )
    assert rows[0][1] == main_only.accuracy
    assert rows[0] == rows[1]  # duplicate ratios give duplicate rows
    with pytest.raises(ValueError):
        sweep_comp_ratio(state, test, [-0.5])


def test_sweep_on_dac_disabled_state_is_flat(small_dataset):
    train, test = small_dataset
    state, _ = run_protocol(
        LearnerConfig(d_buffer=64, seed=1, enable_dac=False), train, test
    )
    rows = sweep_comp_ratio(state, test, [0.0, 0.5, 1.0])
    assert len({acc for _, acc in rows}) == 1


def test_evaluation_is_pure(small_dataset):
    train, test = small_dataset
    state, _ = run_protocol(CFG, train, test)
    base = frozenset(test.phases[0].classes)
    a = evaluate_cumulative(state, test, 2, base)
    b = evaluate_cumulative(state, test, 2, base)
    assert a == b


def test_alignment_checks(tmp_path, small_dataset):
    train, _ = small_dataset
    other = SyntheticSpec(classes=6, per_class=5, d_cnn=16, seed=1, test_per_class=2)
    _, other_test = generate_synthetic(other, tmp_path)
    with pytest.raises(ManifestError, match="phases"):
        run_protocol(CFG, train, other_test)
    # same phase count, different class sets
    entries = tuple(
        PhaseEntry(p.embeddings, p.labels, tuple(c + 100 for c in p.classes))
        for p in train.phases
    )
    mismatched = PhaseManifest(phases=entries, split="test", root=train.root)
    with pytest.raises(ManifestError, match="class sets differ"):
        run_protocol(CFG, train, mismatched)


def test_report_writers(tmp_path, small_dataset):
    train, test = small_dataset
    _, report = run_protocol(CFG, train, test)
    write_report_json(report, tmp_path / "r.json")
    doc = json.loads((tmp_path / "r.json").read_text())
    for key in (
        "per_phase_accuracy",
        "average_accuracy",
        "last_accuracy",
        "base_accuracy",
        "novel_accuracy",
        "config",
        "phases",
    ):
        assert key in doc
    assert doc["per_phase_accuracy"] == list(report.per_phase_accuracy)
    assert doc["config"]["d_buffer"] == 64

    write_report_csv(report, tmp_path / "r.csv")
    with open(tmp_path / "r.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "phase"
    assert len(rows) == len(report.per_phase) + 1
    assert float(rows[-1][2]) == pytest.approx(report.last_accuracy, abs=1e-6)