"""Writers for the dsal on-disk formats.

Implemented from the format contract (magic, version, header layout) so this
package stays decoupled from the learner's code; the only shared surface is
the bytes on disk.
"""

import json
import struct
from pathlib import Path

import numpy as np

MATRIX_MAGIC = b"DSAL"
LABEL_MAGIC = b"DSLB"
_MATRIX_HEADER = struct.Struct("<4sHQQ")
_LABEL_HEADER = struct.Struct("<4sHQ")


def write_embeddings(path: str | Path, data: np.ndarray) -> None:
    """Write a float32 embedding matrix (format version 1)."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise ValueError(f"embeddings must be 2-D, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ValueError("refusing to write non-finite embeddings")
    with open(path, "wb") as fh:
        fh.write(_MATRIX_HEADER.pack(MATRIX_MAGIC, 1, data.shape[0], data.shape[1]))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def write_labels(path: str | Path, labels: np.ndarray) -> None:
    """Write per-row class ids as u32 (format version 1)."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= 2**32):
        raise ValueError("class ids must fit in an unsigned 32-bit integer")
    with open(path, "wb") as fh:
        fh.write(_LABEL_HEADER.pack(LABEL_MAGIC, 1, labels.shape[0]))
        fh.write(np.ascontiguousarray(labels, dtype="<u4").tobytes())


def write_manifest(path: str | Path, split: str, phases: list[dict]) -> None:
    """Write a phase manifest; ``phases`` entries carry embeddings/labels/classes."""
    doc = {"split": split, "phases": phases}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
