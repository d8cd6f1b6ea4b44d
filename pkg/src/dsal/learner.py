"""Phase-by-phase orchestration of both streams and combined inference.

Per incremental phase the pipeline is fixed: expand the main stream's
columns, fold the phase into the main stream, compute the residue with the
updated main weights, cleanse old-class columns, expand the compensation
stream, and fold the (activations, cleansed residue) pair into it. The
combined score is ``main + ratio * compensation``; the ratio is an
inference-time knob, so sweeping it needs no retraining.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .buffer import ACTIVATIONS, BufferLayer, activate_comp, activate_main, new_buffer
from .compensation import ResidueLabels, apply_plc, compute_residue, dac_update, fit_base_comp
from .errors import ClassOverlapError, FormatError, ShapeError
from .store import PhaseDataset, one_hot, read_matrix, write_matrix
from .stream import (
    PhaseUpdate,
    StreamState,
    assert_spd,
    expand_classes,
    fit_base,
    predict,
    rls_update,
    rls_update_chunked,
)

CHECKPOINT_FILE = "learner.json"


@dataclass(frozen=True)
class LearnerConfig:
    """Everything needed to reproduce a run, minus the data itself."""

    gamma: float = 1.0
    d_buffer: int = 512
    seed: int = 0
    sigma_main: str = "relu"
    sigma_comp: str = "tanh"
    comp_ratio: float = 0.6
    chunk_rows: int | None = None
    enable_dac: bool = True
    enable_plc: bool = True
    gamma_comp: float | None = None  # defaults to gamma
    record_targets: bool = False
    debug_checks: bool = False

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.gamma_comp is not None and self.gamma_comp <= 0:
            raise ValueError("gamma_comp must be positive")
        if self.comp_ratio < 0:
            raise ValueError("comp_ratio must be non-negative")
        if self.d_buffer < 1:
            raise ValueError("d_buffer must be positive")
        if self.chunk_rows is not None and self.chunk_rows < 1:
            raise ValueError("chunk_rows must be at least 1")
        for name in (self.sigma_main, self.sigma_comp):
            if name not in ACTIVATIONS:
                raise ValueError(f"unknown activation {name!r}")

    @property
    def comp_gamma(self) -> float:
        return self.gamma if self.gamma_comp is None else self.gamma_comp


@dataclass(frozen=True)
class RecordedTarget:
    """Debug record of one phase's compensation supervision."""

    phase_index: int
    raw_residue: ResidueLabels
    target: ResidueLabels


@dataclass(frozen=True)
class LearnerState:
    """Both streams plus the buffer and the global class registry."""

    config: LearnerConfig
    buffer: BufferLayer
    main: StreamState
    comp: StreamState
    phase_counter: int  # number of completed phases, base included
    target_log: tuple[RecordedTarget, ...] = field(default=())

    def __post_init__(self):
        if self.main.column_layout != self.comp.column_layout:
            raise ShapeError("main and compensation column layouts diverged")

    @property
    def class_registry(self) -> tuple[int, ...]:
        return self.main.column_layout

    @property
    def comp_ratio(self) -> float:
        return self.config.comp_ratio


def _update(state: StreamState, update: PhaseUpdate, chunk_rows: int | None) -> StreamState:
    if chunk_rows is None:
        return rls_update(state, update)
    return rls_update_chunked(state, update, chunk_rows)


def init_base(config: LearnerConfig, phase0: PhaseDataset) -> LearnerState:
    """Fit both streams on the base phase and open the class registry."""
    if phase0.n_samples == 0:
        raise ValueError("the base phase must contain samples")
    buffer = new_buffer(
        phase0.d_cnn, config.d_buffer, config.seed, config.sigma_main, config.sigma_comp
    )
    layout = tuple(phase0.class_set)
    x_main = activate_main(buffer, phase0.embeddings)
    labels = one_hot(phase0.labels, layout)
    main = fit_base(x_main, labels, config.gamma, layout)

    log: tuple[RecordedTarget, ...] = ()
    if config.enable_dac:
        residue = compute_residue(main, x_main, labels, new_class_count=len(layout))
        target = apply_plc(residue, 0) if config.enable_plc else residue
        x_comp = activate_comp(buffer, phase0.embeddings)
        comp = fit_base_comp(x_comp, target, config.comp_gamma, layout)
        if config.record_targets:
            log = (RecordedTarget(0, residue, target),)
    else:
        comp = StreamState(
            weights=np.zeros((config.d_buffer, len(layout))),
            iacm=np.eye(config.d_buffer) / config.comp_gamma,
            column_layout=layout,
            gamma=config.comp_gamma,
        )
    state = LearnerState(
        config=config, buffer=buffer, main=main, comp=comp, phase_counter=1, target_log=log
    )
    if config.debug_checks:
        assert_spd(state.main)
        assert_spd(state.comp)
    return state


def learn_phase(state: LearnerState, phase: PhaseDataset) -> LearnerState:
    """Absorb one incremental phase into both streams."""
    config = state.config
    clash = set(state.class_registry).intersection(phase.class_set)
    if clash:
        raise ClassOverlapError(
            f"phase {phase.phase_index} re-declares known classes {sorted(clash)}"
        )
    k = state.phase_counter
    x_main = activate_main(state.buffer, phase.embeddings)
    main = expand_classes(state.main, phase.class_set)
    labels = one_hot(phase.labels, main.column_layout)
    main = _update(main, PhaseUpdate(x_main, labels), config.chunk_rows)

    log = state.target_log
    comp = expand_classes(state.comp, phase.class_set)
    if config.enable_dac:
        residue = compute_residue(main, x_main, labels, new_class_count=len(phase.class_set))
        target = apply_plc(residue, k) if config.enable_plc else residue
        x_comp = activate_comp(state.buffer, phase.embeddings)
        comp = dac_update(comp, x_comp, target, config.chunk_rows)
        if config.record_targets:
            log = log + (RecordedTarget(k, residue, target),)

    out = LearnerState(
        config=config,
        buffer=state.buffer,
        main=main,
        comp=comp,
        phase_counter=k + 1,
        target_log=log,
    )
    if config.debug_checks:
        assert_spd(out.main)
        assert_spd(out.comp)
    return out


def predict_combined(
    state: LearnerState, embeddings: np.ndarray, comp_ratio: float | None = None
) -> np.ndarray:
    """Combined scores: main-stream scores plus ratio-weighted compensation.

    With the compensation disabled or a zero ratio this returns exactly the
    main-stream scores (bit for bit).
    """
    ratio = state.comp_ratio if comp_ratio is None else float(comp_ratio)
    if ratio < 0:
        raise ValueError("comp_ratio must be non-negative")
    main_scores = predict(state.main, activate_main(state.buffer, embeddings))
    if not state.config.enable_dac or ratio == 0.0:
        return main_scores
    comp_scores = predict(state.comp, activate_comp(state.buffer, embeddings))
    return main_scores + ratio * comp_scores


def classify_scores(scores: np.ndarray, class_registry: tuple[int, ...]) -> np.ndarray:
    """Argmax over score columns, mapping through the registry.

    Exact ties resolve to the lowest class id, regardless of column order.
    """
    ids = np.asarray(class_registry, dtype=np.int64)
    if scores.shape[1] != ids.shape[0]:
        raise ShapeError(f"{scores.shape[1]} score columns for {ids.shape[0]} classes")
    best = scores.max(axis=1, keepdims=True)
    candidates = np.where(scores == best, ids[np.newaxis, :], np.iinfo(np.int64).max)
    return candidates.min(axis=1)


def classify(
    state: LearnerState, embeddings: np.ndarray, comp_ratio: float | None = None
) -> np.ndarray:
    """Predicted class id per row."""
    scores = predict_combined(state, embeddings, comp_ratio)
    return classify_scores(scores, state.class_registry)


def save_checkpoint(state: LearnerState, directory: str | Path) -> None:
    """Write the full state (64-bit payloads, so resume is bit-exact).

    The debug target log is not persisted.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_matrix(directory / "buffer_projection.dsal", state.buffer.projection, np.float64)
    streams = {}
    for tag, stream in (("main", state.main), ("comp", state.comp)):
        write_matrix(directory / f"{tag}_weights.dsal", stream.weights, np.float64)
        write_matrix(directory / f"{tag}_iacm.dsal", stream.iacm, np.float64)
        streams[tag] = {
            "weights": f"{tag}_weights.dsal",
            "iacm": f"{tag}_iacm.dsal",
            "gamma": stream.gamma,
        }
    doc = {
        "format": "dsal-checkpoint",
        "version": 1,
        "config": asdict(state.config),
        "buffer": {
            "projection": "buffer_projection.dsal",
            "seed": state.buffer.seed,
            "sigma_main": state.buffer.sigma_main,
            "sigma_comp": state.buffer.sigma_comp,
        },
        "class_registry": list(state.class_registry),
        "phase_counter": state.phase_counter,
        "streams": streams,
    }
    with open(directory / CHECKPOINT_FILE, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(directory: str | Path) -> LearnerState:
    """Reconstruct a learner from :func:`save_checkpoint` output."""
    directory = Path(directory)
    with open(directory / CHECKPOINT_FILE, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "dsal-checkpoint" or doc.get("version") != 1:
        raise FormatError(f"{directory}: not a recognized checkpoint")
    config = LearnerConfig(**doc["config"])
    buf = doc["buffer"]
    buffer = BufferLayer(
        projection=read_matrix(directory / buf["projection"]),
        sigma_main=buf["sigma_main"],
        sigma_comp=buf["sigma_comp"],
        seed=int(buf["seed"]),
    )
    registry = tuple(int(c) for c in doc["class_registry"])
    states = {}
    for tag in ("main", "comp"):
        entry = doc["streams"][tag]
        states[tag] = StreamState(
            weights=read_matrix(directory / entry["weights"]),
            iacm=read_matrix(directory / entry["iacm"]),
            column_layout=registry,
            gamma=float(entry["gamma"]),
        )
    return LearnerState(
        config=config,
        buffer=buffer,
        main=states["main"],
        comp=states["comp"],
        phase_counter=int(doc["phase_counter"]),
    )


def with_comp_ratio(state: LearnerState, ratio: float) -> LearnerState:
    """Copy of the state with a different inference-time compensation ratio."""
    return replace(state, config=replace(state.config, comp_ratio=ratio))
