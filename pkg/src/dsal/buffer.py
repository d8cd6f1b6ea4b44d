"""Frozen buffer layer: a random linear projection plus two activations.

The projection is drawn once (standard normal, seeded) and never updated.
The same projection feeds both streams; they differ only in the elementwise
nonlinearity applied to the projected embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


def _identity(x: np.ndarray) -> np.ndarray:
    return x


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form avoids exp overflow for large negative inputs
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _mish(x: np.ndarray) -> np.ndarray:
    return x * np.tanh(_softplus(x))


def _hardswish(x: np.ndarray) -> np.ndarray:
    return x * np.clip(x + 3.0, 0.0, 6.0) / 6.0


ACTIVATIONS = {
    "identity": _identity,
    "relu": _relu,
    "tanh": np.tanh,
    "sigmoid": _sigmoid,
    "mish": _mish,
    "hardswish": _hardswish,
}


@dataclass(frozen=True)
class BufferLayer:
    """Immutable projection matrix with the two stream activations."""

    projection: np.ndarray  # (d_cnn, d_buffer) float64
    sigma_main: str
    sigma_comp: str
    seed: int

    def __post_init__(self):
        if self.projection.ndim != 2:
            raise ShapeError("projection must be a 2-D matrix")
        for name in (self.sigma_main, self.sigma_comp):
            if name not in ACTIVATIONS:
                raise ValueError(
                    f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}"
                )
        self.projection.setflags(write=False)

    @property
    def d_cnn(self) -> int:
        return self.projection.shape[0]

    @property
    def d_buffer(self) -> int:
        return self.projection.shape[1]


def new_buffer(
    d_cnn: int,
    d_buffer: int,
    seed: int,
    sigma_main: str = "relu",
    sigma_comp: str = "tanh",
) -> BufferLayer:
    """Draw a fresh buffer layer: i.i.d. standard-normal projection entries."""
    if d_cnn < 1 or d_buffer < 1:
        raise ValueError("projection dimensions must be positive")
    rng = np.random.default_rng(seed)
    projection = rng.standard_normal((d_cnn, d_buffer))
    return BufferLayer(
        projection=projection, sigma_main=sigma_main, sigma_comp=sigma_comp, seed=seed
    )


def _activate(buffer: BufferLayer, embeddings: np.ndarray, name: str) -> np.ndarray:
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[1] != buffer.d_cnn:
        raise ShapeError(
            f"embeddings have shape {embeddings.shape}, expected (*, {buffer.d_cnn})"
        )
    return ACTIVATIONS[name](embeddings @ buffer.projection)


def activate_main(buffer: BufferLayer, embeddings: np.ndarray) -> np.ndarray:
    """Project embeddings and apply the main-stream activation."""
    return _activate(buffer, embeddings, buffer.sigma_main)


def activate_comp(buffer: BufferLayer, embeddings: np.ndarray) -> np.ndarray:
    """Project embeddings and apply the compensation-stream activation."""
    return _activate(buffer, embeddings, buffer.sigma_comp)
