"""Ridge base fit and the concatenated recursive least-squares update.

A stream keeps a weight matrix (one column per known class) and the
inverted auto-correlation matrix R = (XtX + gamma I)^-1 over every row it
has absorbed. New classes append zero columns to the weights; new rows fold
in through a rank-N update of R followed by a correction of the weights,
which reproduces the joint ridge solution over all rows seen so far without
keeping any of them.

All operations are pure: they return new states and never mutate inputs,
so states may be shared freely. Updates are order-dependent across calls
and must be applied sequentially; prediction is read-only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ClassOverlapError, NumericalError, ShapeError


def _as_matrix(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def _require_finite(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"non-finite entries in {name}")


@dataclass(frozen=True)
class StreamState:
    """Weights, inverted auto-correlation, and the class-column layout."""

    weights: np.ndarray        # (d_buffer, n_classes)
    iacm: np.ndarray           # (d_buffer, d_buffer), symmetric positive definite
    column_layout: tuple[int, ...]
    gamma: float

    def __post_init__(self):
        if self.weights.shape[1] != len(self.column_layout):
            raise ShapeError(
                f"{self.weights.shape[1]} weight columns for "
                f"{len(self.column_layout)} layout entries"
            )
        if self.iacm.shape != (self.weights.shape[0], self.weights.shape[0]):
            raise ShapeError("iacm must be square with the weight row dimension")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    @property
    def d_buffer(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class PhaseUpdate:
    """One phase's activations with labels laid out over the current columns."""

    activations: np.ndarray  # (n, d_buffer)
    labels: np.ndarray       # (n, n_classes)

    def __post_init__(self):
        object.__setattr__(self, "activations", _as_matrix(self.activations, "activations"))
        object.__setattr__(self, "labels", _as_matrix(self.labels, "labels"))
        if self.activations.shape[0] != self.labels.shape[0]:
            raise ShapeError(
                f"{self.activations.shape[0]} activation rows vs "
                f"{self.labels.shape[0]} label rows"
            )
        _require_finite(self.activations, "activations")
        _require_finite(self.labels, "labels")

    @property
    def n_rows(self) -> int:
        return self.activations.shape[0]


def _symmetrize(r: np.ndarray) -> np.ndarray:
    return (r + r.T) / 2.0


def fit_base(
    activations: np.ndarray,
    labels: np.ndarray,
    gamma: float,
    column_layout: tuple[int, ...],
) -> StreamState:
    """Solve the regularized least-squares base problem from scratch.

    Weights come from a factorization-based solve of the normal equations;
    the inverted auto-correlation matrix is materialized because the
    recursion needs it explicitly.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    x = _as_matrix(activations, "activations")
    y = _as_matrix(labels, "labels")
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"{x.shape[0]} activation rows vs {y.shape[0]} label rows")
    if y.shape[1] != len(column_layout):
        raise ShapeError(
            f"{y.shape[1]} label columns for {len(column_layout)} layout entries"
        )
    _require_finite(x, "activations")
    _require_finite(y, "labels")
    d = x.shape[1]
    gram = x.T @ x + gamma * np.eye(d)
    try:
        weights = np.linalg.solve(gram, x.T @ y)
        iacm = np.linalg.solve(gram, np.eye(d))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"base factorization failed: {exc}") from exc
    return StreamState(
        weights=weights,
        iacm=_symmetrize(iacm),
        column_layout=tuple(column_layout),
        gamma=float(gamma),
    )


def expand_classes(state: StreamState, new_classes) -> StreamState:
    """Append zero weight columns for classes never seen before."""
    new_classes = tuple(int(c) for c in new_classes)
    if not new_classes:
        return state
    if len(set(new_classes)) != len(new_classes):
        raise ClassOverlapError(f"duplicate class ids in {new_classes}")
    clash = set(state.column_layout).intersection(new_classes)
    if clash:
        raise ClassOverlapError(f"classes {sorted(clash)} already have columns")
    zeros = np.zeros((state.d_buffer, len(new_classes)))
    return StreamState(
        weights=np.hstack([state.weights, zeros]),
        iacm=state.iacm,
        column_layout=state.column_layout + new_classes,
        gamma=state.gamma,
    )


def rls_update(state: StreamState, update: PhaseUpdate) -> StreamState:
    """Fold one batch of rows into the stream.

    The inverted auto-correlation matrix is updated first; the weight
    correction then uses the updated matrix. A zero-row update is the
    identity.
    """
    if update.n_rows == 0:
        return state
    if update.activations.shape[1] != state.d_buffer:
        raise ShapeError(
            f"activations have {update.activations.shape[1]} columns, "
            f"stream expects {state.d_buffer}"
        )
    if update.labels.shape[1] != len(state.column_layout):
        raise ShapeError(
            f"labels have {update.labels.shape[1]} columns, "
            f"layout has {len(state.column_layout)}"
        )
    x, y = update.activations, update.labels
    r = state.iacm
    xr = x @ r
    inner = np.eye(update.n_rows) + xr @ x.T
    try:
        solved = np.linalg.solve(inner, xr)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"inner factorization failed: {exc}") from exc
    r_new = _symmetrize(r - xr.T @ solved)
    gain = r_new @ x.T
    weights = state.weights + gain @ (y - x @ state.weights)
    return StreamState(
        weights=weights,
        iacm=r_new,
        column_layout=state.column_layout,
        gamma=state.gamma,
    )


def rls_update_chunked(
    state: StreamState, update: PhaseUpdate, chunk_rows: int
) -> StreamState:
    """Apply ``rls_update`` over row slices of at most ``chunk_rows``.

    Equivalent to the unchunked update (the recursion is associative over
    row partitions); keeps the inner solve at chunk size instead of the
    full batch size.
    """
    if chunk_rows < 1:
        raise ValueError("chunk_rows must be at least 1")
    if update.n_rows <= chunk_rows:
        return rls_update(state, update)
    for start in range(0, update.n_rows, chunk_rows):
        stop = start + chunk_rows
        piece = PhaseUpdate(
            activations=update.activations[start:stop],
            labels=update.labels[start:stop],
        )
        state = rls_update(state, piece)
    return state


def predict(state: StreamState, activations: np.ndarray) -> np.ndarray:
    """Linear scores for already-activated rows."""
    x = _as_matrix(activations, "activations")
    if x.shape[1] != state.d_buffer:
        raise ShapeError(
            f"activations have {x.shape[1]} columns, stream expects {state.d_buffer}"
        )
    return x @ state.weights


def assert_spd(state: StreamState, sym_rtol: float = 1e-8) -> None:
    """Debug check: the iacm must be symmetric positive definite."""
    r = state.iacm
    denom = np.linalg.norm(r) or 1.0
    if np.linalg.norm(r - r.T) / denom > sym_rtol:
        raise NumericalError("iacm symmetry drifted beyond tolerance")
    try:
        np.linalg.cholesky(r)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("iacm is not positive definite") from exc
