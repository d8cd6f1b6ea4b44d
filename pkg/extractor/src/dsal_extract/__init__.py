"""Feature extraction into dsal embedding files."""

from .extract import BACKBONES, PREPROCESSING, ExtractionSpec, extract, split_classes
from .formats import write_embeddings, write_labels, write_manifest

__version__ = "0.1.0"

__all__ = [
    "BACKBONES",
    "PREPROCESSING",
    "ExtractionSpec",
    "extract",
    "split_classes",
    "write_embeddings",
    "write_labels",
    "write_manifest",
]
