"""On-disk formats for embeddings, labels, and phase manifests.

Matrix files: magic ``DSAL``, u16 version, u64 rows, u64 cols, then the
row-major payload, all little-endian. Version 1 stores 32-bit floats (the
embedding interchange format); version 2 stores 64-bit floats and is used
for checkpoints, where reload must be bit-exact.

Label files: magic ``DSLB``, u16 version, u64 rows, then u32 class ids.

Manifests are JSON: an ordered list of phases, each naming an embedding
file, a label file, and the phase's declared class set. Class sets must be
pairwise disjoint. Paths are resolved relative to the manifest's directory.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ManifestError, UnknownLabelError

MATRIX_MAGIC = b"DSAL"
LABEL_MAGIC = b"DSLB"
MATRIX_VERSION_F32 = 1
MATRIX_VERSION_F64 = 2
LABEL_VERSION = 1

_MATRIX_HEADER = struct.Struct("<4sHQQ")
_LABEL_HEADER = struct.Struct("<4sHQ")
_MATRIX_DTYPES = {
    MATRIX_VERSION_F32: np.dtype("<f4"),
    MATRIX_VERSION_F64: np.dtype("<f8"),
}


def write_matrix(path: str | Path, data: np.ndarray, dtype=np.float32) -> None:
    """Write a 2-D real matrix. ``dtype`` picks the on-disk precision."""
    data = np.asarray(data)
    if data.ndim != 2:
        raise FormatError(f"matrix payload must be 2-D, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise FormatError("refusing to write non-finite matrix entries")
    dtype = np.dtype(dtype)
    version = {4: MATRIX_VERSION_F32, 8: MATRIX_VERSION_F64}.get(dtype.itemsize)
    if dtype.kind != "f" or version is None:
        raise FormatError(f"unsupported matrix dtype {dtype}")
    payload = np.ascontiguousarray(data, dtype=dtype.newbyteorder("<"))
    header = _MATRIX_HEADER.pack(MATRIX_MAGIC, version, data.shape[0], data.shape[1])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_matrix(path: str | Path) -> np.ndarray:
    """Read a matrix file, promoting the payload to float64."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _MATRIX_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, rows, cols = _MATRIX_HEADER.unpack_from(raw)
    if magic != MATRIX_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    dtype = _MATRIX_DTYPES.get(version)
    if dtype is None:
        raise FormatError(f"{path}: unsupported matrix format version {version}")
    expected = rows * cols * dtype.itemsize
    actual = len(raw) - _MATRIX_HEADER.size
    if actual != expected:
        raise FormatError(
            f"{path}: dimension mismatch, header declares {rows}x{cols} "
            f"({expected} payload bytes) but file holds {actual}"
        )
    data = np.frombuffer(raw, dtype=dtype, offset=_MATRIX_HEADER.size)
    out = data.reshape(rows, cols).astype(np.float64)
    if not np.all(np.isfinite(out)):
        raise FormatError(f"{path}: non-finite entry in matrix payload")
    return out


def write_labels(path: str | Path, labels: np.ndarray) -> None:
    """Write per-row class ids as u32."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise FormatError(f"labels must be 1-D, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= 2**32):
        raise FormatError("class ids must fit in an unsigned 32-bit integer")
    payload = np.ascontiguousarray(labels, dtype=np.dtype("<u4"))
    with open(path, "wb") as fh:
        fh.write(_LABEL_HEADER.pack(LABEL_MAGIC, LABEL_VERSION, labels.shape[0]))
        fh.write(payload.tobytes())


def read_labels(path: str | Path) -> np.ndarray:
    """Read a label file as an int64 vector."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _LABEL_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, rows = _LABEL_HEADER.unpack_from(raw)
    if magic != LABEL_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != LABEL_VERSION:
        raise FormatError(f"{path}: unsupported label format version {version}")
    expected = rows * 4
    actual = len(raw) - _LABEL_HEADER.size
    if actual != expected:
        raise FormatError(
            f"{path}: dimension mismatch, header declares {rows} rows "
            f"({expected} payload bytes) but file holds {actual}"
        )
    data = np.frombuffer(raw, dtype=np.dtype("<u4"), offset=_LABEL_HEADER.size)
    return data.astype(np.int64)


@dataclass(frozen=True)
class PhaseEntry:
    """One phase in a manifest: file names plus the declared class set."""

    embeddings: str
    labels: str
    classes: tuple[int, ...]


@dataclass(frozen=True)
class PhaseManifest:
    """Ordered list of phases for one split. Phase 0 is the base phase."""

    phases: tuple[PhaseEntry, ...]
    split: str
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        if not self.phases:
            raise ManifestError("manifest must declare at least one phase")
        seen: set[int] = set()
        for idx, phase in enumerate(self.phases):
            overlap = seen.intersection(phase.classes)
            if overlap:
                raise ManifestError(
                    f"class overlap: phase {idx} re-declares classes {sorted(overlap)}"
                )
            if len(set(phase.classes)) != len(phase.classes):
                raise ManifestError(f"phase {idx} declares duplicate class ids")
            seen.update(phase.classes)

    def path_for(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.root / p


@dataclass(frozen=True)
class PhaseDataset:
    """A loaded phase: embeddings, per-row labels, and the class set."""

    embeddings: np.ndarray  # (n, d_cnn) float64
    labels: np.ndarray      # (n,) int64
    class_set: tuple[int, ...]
    phase_index: int

    def __post_init__(self):
        if self.embeddings.ndim != 2:
            raise ManifestError("embeddings must be a 2-D matrix")
        if self.labels.shape != (self.embeddings.shape[0],):
            raise ManifestError(
                f"label count {self.labels.shape[0]} does not match "
                f"{self.embeddings.shape[0]} embedding rows"
            )
        unknown = set(self.labels.tolist()) - set(self.class_set)
        if unknown:
            raise ManifestError(
                f"labels {sorted(unknown)} fall outside the declared class set"
            )

    @property
    def n_samples(self) -> int:
        return self.embeddings.shape[0]

    @property
    def d_cnn(self) -> int:
        return self.embeddings.shape[1]


def save_manifest(manifest: PhaseManifest, path: str | Path) -> None:
    doc = {
        "split": manifest.split,
        "phases": [
            {"embeddings": p.embeddings, "labels": p.labels, "classes": list(p.classes)}
            for p in manifest.phases
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path: str | Path) -> PhaseManifest:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
    try:
        phases = tuple(
            PhaseEntry(
                embeddings=str(p["embeddings"]),
                labels=str(p["labels"]),
                classes=tuple(int(c) for c in p["classes"]),
            )
            for p in doc["phases"]
        )
        split = str(doc.get("split", "train"))
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"{path}: malformed manifest ({exc})") from exc
    return PhaseManifest(phases=phases, split=split, root=path.parent)


def load_phase(manifest: PhaseManifest, k: int) -> PhaseDataset:
    """Load and validate phase ``k`` of a manifest."""
    if not 0 <= k < len(manifest.phases):
        raise ManifestError(
            f"phase index {k} out of range (manifest has {len(manifest.phases)} phases)"
        )
    entry = manifest.phases[k]
    embeddings = read_matrix(manifest.path_for(entry.embeddings))
    labels = read_labels(manifest.path_for(entry.labels))
    if embeddings.shape[1] < 1:
        raise FormatError(f"{entry.embeddings}: embeddings must have at least one column")
    if labels.shape[0] != embeddings.shape[0]:
        raise FormatError(
            f"phase {k}: embedding file has {embeddings.shape[0]} rows but "
            f"label file has {labels.shape[0]}"
        )
    return PhaseDataset(
        embeddings=embeddings, labels=labels, class_set=entry.classes, phase_index=k
    )


def one_hot(labels: np.ndarray, column_layout: tuple[int, ...]) -> np.ndarray:
    """Encode labels against an ordered class-column layout.

    Each row gets a single 1.0 in the column assigned to its class.
    """
    column_of = {cls: i for i, cls in enumerate(column_layout)}
    labels = np.asarray(labels).reshape(-1)
    out = np.zeros((labels.shape[0], len(column_layout)))
    for row, label in enumerate(labels.tolist()):
        col = column_of.get(label)
        if col is None:
            raise UnknownLabelError(f"label {label} not present in column layout")
        out[row, col] = 1.0
    return out


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for a synthetic clustered-embedding dataset.

    Each class is a Gaussian cluster: a unit-normal center plus ``spread``
    times unit-normal noise. ``phases`` incremental phases follow the base
    phase; the base phase takes ``base_classes`` classes (default: half)
    and the rest are divided evenly.
    """

    classes: int
    per_class: int
    d_cnn: int
    spread: float = 1.0
    seed: int = 0
    phases: int = 0
    base_classes: int | None = None
    test_per_class: int = 0

    def __post_init__(self):
        if self.classes < 0 or self.per_class < 0 or self.test_per_class < 0:
            raise ValueError("counts must be non-negative")
        if self.d_cnn < 1:
            raise ValueError("d_cnn must be positive")
        if self.spread < 0:
            raise ValueError("spread must be non-negative")
        if self.phases < 0:
            raise ValueError("phases must be non-negative")

    def class_split(self) -> list[tuple[int, ...]]:
        """Class ids per phase: base phase first, then even increments."""
        ids = list(range(self.classes))
        if self.phases == 0:
            return [tuple(ids)]
        base = self.classes // 2 if self.base_classes is None else self.base_classes
        if not 0 < base <= self.classes:
            raise ValueError(f"base phase must take between 1 and {self.classes} classes")
        remaining = self.classes - base
        if remaining == 0 or remaining % self.phases != 0:
            raise ValueError(
                f"{self.phases} phases cannot evenly split the {remaining} "
                f"classes left after the base phase"
            )
        step = remaining // self.phases
        split = [tuple(ids[:base])]
        for start in range(base, self.classes, step):
            split.append(tuple(ids[start:start + step]))
        return split


def generate_synthetic(
    spec: SyntheticSpec, out_dir: str | Path
) -> tuple[PhaseManifest, PhaseManifest | None]:
    """Write a synthetic dataset and return its manifest(s).

    Deterministic for a fixed spec: reruns produce byte-identical files.
    Returns (train manifest, test manifest or None); a test manifest is
    produced when ``test_per_class`` is positive, drawn from the same
    cluster centers.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    centers = rng.standard_normal((spec.classes, spec.d_cnn))
    train = [
        centers[c] + spec.spread * rng.standard_normal((spec.per_class, spec.d_cnn))
        for c in range(spec.classes)
    ]
    test = [
        centers[c] + spec.spread * rng.standard_normal((spec.test_per_class, spec.d_cnn))
        for c in range(spec.classes)
    ]
    split = spec.class_split()

    def write_split(name: str, blocks: list[np.ndarray]) -> PhaseManifest:
        entries = []
        for idx, class_ids in enumerate(split):
            rows = [blocks[c] for c in class_ids]
            emb = np.vstack(rows) if rows else np.zeros((0, spec.d_cnn))
            counts = [b.shape[0] for b in rows]
            lbl = (
                np.repeat(np.asarray(class_ids, dtype=np.int64), counts)
                if rows
                else np.zeros(0, dtype=np.int64)
            )
            emb_name = f"{name}_phase{idx:03d}.dsal"
            lbl_name = f"{name}_phase{idx:03d}.dslb"
            write_matrix(out_dir / emb_name, emb, dtype=np.float32)
            write_labels(out_dir / lbl_name, lbl)
            entries.append(PhaseEntry(embeddings=emb_name, labels=lbl_name, classes=class_ids))
        manifest = PhaseManifest(phases=tuple(entries), split=name, root=out_dir)
        save_manifest(manifest, out_dir / f"{name}_manifest.json")
        return manifest

    train_manifest = write_split("train", train)
    test_manifest = write_split("test", test) if spec.test_per_class > 0 else None
    return train_manifest, test_manifest
