"""Compensation stream: residue targets, label cleansing, and its updates.

The compensation stream regresses the main stream's leftover error instead
of class labels. Its training target for a phase is the residue (padded
one-hot labels minus post-update main-stream scores); for every phase after
the base one, the columns of classes from earlier phases are zeroed before
fitting, so the compensation never receives supervision for classes the
phase does not contain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .stream import PhaseUpdate, StreamState, fit_base, rls_update, rls_update_chunked


@dataclass(frozen=True)
class ResidueLabels:
    """Residue target matrix plus the number of current-phase class columns."""

    values: np.ndarray  # (n, n_classes)
    new_class_count: int

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ShapeError("residue values must be 2-D")
        if not 0 <= self.new_class_count <= self.values.shape[1]:
            raise ShapeError(
                f"new_class_count {self.new_class_count} out of range for "
                f"{self.values.shape[1]} columns"
            )


def compute_residue(
    main_state: StreamState,
    main_activations: np.ndarray,
    labels_one_hot: np.ndarray,
    new_class_count: int,
) -> ResidueLabels:
    """Residue after the main stream absorbed the phase: labels minus scores.

    ``main_state`` must already include the phase's rows; ``labels_one_hot``
    is laid out over the full current column layout (old-class columns are
    zero because phase labels only name the phase's own classes).
    """
    x = np.asarray(main_activations, dtype=np.float64)
    y = np.asarray(labels_one_hot, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != main_state.d_buffer:
        raise ShapeError(
            f"activations have shape {x.shape}, expected (*, {main_state.d_buffer})"
        )
    if y.shape != (x.shape[0], len(main_state.column_layout)):
        raise ShapeError(
            f"labels have shape {y.shape}, expected "
            f"({x.shape[0]}, {len(main_state.column_layout)})"
        )
    residue = y - x @ main_state.weights
    return ResidueLabels(values=residue, new_class_count=new_class_count)


def apply_plc(residue: ResidueLabels, phase_index: int) -> ResidueLabels:
    """Zero the old-class columns of the residue. Identity at the base phase.

    Idempotent: cleansing an already cleansed residue changes nothing.
    """
    if phase_index == 0:
        return residue
    old = residue.values.shape[1] - residue.new_class_count
    values = residue.values.copy()
    values[:, :old] = 0.0
    return ResidueLabels(values=values, new_class_count=residue.new_class_count)


def fit_base_comp(
    comp_activations: np.ndarray,
    residue: ResidueLabels,
    gamma: float,
    column_layout: tuple[int, ...],
) -> StreamState:
    """Base fit of the compensation stream against the phase-0 residue."""
    return fit_base(comp_activations, residue.values, gamma, column_layout)


def dac_update(
    comp_state: StreamState,
    comp_activations: np.ndarray,
    plc_residue: ResidueLabels,
    chunk_rows: int | None = None,
) -> StreamState:
    """Recursive compensation update with the cleansed residue as target.

    ``comp_state`` must already carry columns for the phase's new classes.
    """
    update = PhaseUpdate(activations=comp_activations, labels=plc_residue.values)
    if chunk_rows is None:
        return rls_update(comp_state, update)
    return rls_update_chunked(comp_state, update, chunk_rows)
