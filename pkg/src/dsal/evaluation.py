"""Protocol driver: train over the phase stream, score on cumulative test sets.

After every training phase k the learner is scored on the union of test
phases 0..k. All accuracies are percentages. The summary report carries the
per-phase curve, its mean, the final value, and the base/novel breakdown
(base = classes present in phase 0, novel = everything introduced later).
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .buffer import activate_comp, activate_main
from .errors import ManifestError
from .learner import LearnerConfig, LearnerState, classify, classify_scores, init_base, learn_phase
from .store import PhaseManifest, load_phase
from .stream import predict


@dataclass(frozen=True)
class PhaseResult:
    """Accuracy after one training phase, on test data seen so far."""

    phase_index: int
    n_test: int
    accuracy: float
    base_accuracy: float
    novel_accuracy: float | None  # None until novel classes exist


@dataclass(frozen=True)
class EvaluationReport:
    """Full protocol outcome plus the config that produced it."""

    per_phase: tuple[PhaseResult, ...]
    average_accuracy: float
    last_accuracy: float
    base_accuracy: float
    novel_accuracy: float | None
    config: LearnerConfig

    @property
    def per_phase_accuracy(self) -> tuple[float, ...]:
        return tuple(r.accuracy for r in self.per_phase)

    def as_dict(self) -> dict:
        # Flat summary fields first; these names are the stable interface.
        return {
            "per_phase_accuracy": list(self.per_phase_accuracy),
            "average_accuracy": self.average_accuracy,
            "last_accuracy": self.last_accuracy,
            "base_accuracy": self.base_accuracy,
            "novel_accuracy": self.novel_accuracy,
            "config": asdict(self.config),
            "phases": [asdict(r) for r in self.per_phase],
        }


def _check_alignment(train: PhaseManifest, test: PhaseManifest) -> None:
    if len(train.phases) != len(test.phases):
        raise ManifestError(
            f"train has {len(train.phases)} phases but test has {len(test.phases)}"
        )
    for k, (a, b) in enumerate(zip(train.phases, test.phases)):
        if set(a.classes) != set(b.classes):
            raise ManifestError(f"phase {k}: train and test class sets differ")


def accuracy_percent(predicted: np.ndarray, truth: np.ndarray) -> float:
    if truth.shape[0] == 0:
        raise ValueError("cannot score an empty test set")
    return float(np.mean(predicted == truth) * 100.0)


def evaluate_cumulative(
    state: LearnerState,
    test_manifest: PhaseManifest,
    upto: int,
    base_classes: frozenset[int],
    comp_ratio: float | None = None,
) -> PhaseResult:
    """Score the learner on test phases 0..upto pooled together."""
    blocks = [load_phase(test_manifest, k) for k in range(upto + 1)]
    embeddings = np.vstack([b.embeddings for b in blocks])
    truth = np.concatenate([b.labels for b in blocks])
    predicted = classify(state, embeddings, comp_ratio)
    is_base = np.isin(truth, np.fromiter(base_classes, dtype=np.int64))
    base_acc = accuracy_percent(predicted[is_base], truth[is_base]) if is_base.any() else 0.0
    novel_acc = None
    if (~is_base).any():
        novel_acc = accuracy_percent(predicted[~is_base], truth[~is_base])
    return PhaseResult(
        phase_index=upto,
        n_test=truth.shape[0],
        accuracy=accuracy_percent(predicted, truth),
        base_accuracy=base_acc,
        novel_accuracy=novel_acc,
    )


def run_protocol(
    config: LearnerConfig,
    train_manifest: PhaseManifest,
    test_manifest: PhaseManifest,
) -> tuple[LearnerState, EvaluationReport]:
    """Train phase by phase, evaluating after each phase."""
    _check_alignment(train_manifest, test_manifest)
    base_classes = frozenset(train_manifest.phases[0].classes)
    state = init_base(config, load_phase(train_manifest, 0))
    results = [evaluate_cumulative(state, test_manifest, 0, base_classes)]
    for k in range(1, len(train_manifest.phases)):
        state = learn_phase(state, load_phase(train_manifest, k))
        results.append(evaluate_cumulative(state, test_manifest, k, base_classes))
    last = results[-1]
    report = EvaluationReport(
        per_phase=tuple(results),
        average_accuracy=float(np.mean([r.accuracy for r in results])),
        last_accuracy=last.accuracy,
        base_accuracy=last.base_accuracy,
        novel_accuracy=last.novel_accuracy,
        config=config,
    )
    return state, report


def sweep_comp_ratio(
    state: LearnerState,
    test_manifest: PhaseManifest,
    ratios: list[float],
) -> list[tuple[float, float]]:
    """Final-phase accuracy per compensation ratio, one inference pass each.

    Main and compensation scores are computed once; only the blend varies.
    """
    upto = len(test_manifest.phases) - 1
    blocks = [load_phase(test_manifest, k) for k in range(upto + 1)]
    embeddings = np.vstack([b.embeddings for b in blocks])
    truth = np.concatenate([b.labels for b in blocks])
    main_scores = predict(state.main, activate_main(state.buffer, embeddings))
    comp_scores = None
    if state.config.enable_dac:
        comp_scores = predict(state.comp, activate_comp(state.buffer, embeddings))
    out = []
    for ratio in ratios:
        if ratio < 0:
            raise ValueError("comp_ratio must be non-negative")
        if comp_scores is None or ratio == 0.0:
            scores = main_scores
        else:
            scores = main_scores + ratio * comp_scores
        predicted = classify_scores(scores, state.class_registry)
        out.append((float(ratio), accuracy_percent(predicted, truth)))
    return out


def write_report_json(report: EvaluationReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_report_csv(report: EvaluationReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phase", "n_test", "accuracy", "base_accuracy", "novel_accuracy"])
        for r in report.per_phase:
            novel = "" if r.novel_accuracy is None else f"{r.novel_accuracy:.6f}"
            writer.writerow(
                [r.phase_index, r.n_test, f"{r.accuracy:.6f}", f"{r.base_accuracy:.6f}", novel]
            )


def write_sweep_csv(rows: list[tuple[float, float]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["comp_ratio", "last_accuracy"])
        for ratio, acc in rows:
            writer.writerow([f"{ratio:.6f}", f"{acc:.6f}"])
