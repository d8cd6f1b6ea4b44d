"""Dual-stream analytic class-incremental learner over precomputed embeddings.

A frozen backbone turns images into embedding vectors once, offline. This
package learns a classifier over those embeddings phase by phase: each phase
introduces new classes, old data is never revisited, and the main stream's
weights after K phases match a joint ridge solve over all phases at once. A
second stream, trained on cleansed residues of the main stream, compensates
the under-fitting that shows up when the closed-form solution saturates.

Attribute access is lazy so that the CLI can configure kernel threading
before numpy is first imported.
"""

from importlib import import_module

__version__ = "0.1.0"

_EXPORTS = {
    # errors
    "DsalError": ".errors",
    "FormatError": ".errors",
    "ManifestError": ".errors",
    "UnknownLabelError": ".errors",
    "ClassOverlapError": ".errors",
    "ShapeError": ".errors",
    "NumericalError": ".errors",
    # storage
    "PhaseEntry": ".store",
    "PhaseManifest": ".store",
    "PhaseDataset": ".store",
    "SyntheticSpec": ".store",
    "read_matrix": ".store",
    "write_matrix": ".store",
    "read_labels": ".store",
    "write_labels": ".store",
    "save_manifest": ".store",
    "load_manifest": ".store",
    "load_phase": ".store",
    "one_hot": ".store",
    "generate_synthetic": ".store",
    # buffer
    "BufferLayer": ".buffer",
    "new_buffer": ".buffer",
    "activate_main": ".buffer",
    "activate_comp": ".buffer",
    # streams
    "StreamState": ".stream",
    "PhaseUpdate": ".stream",
    "fit_base": ".stream",
    "expand_classes": ".stream",
    "rls_update": ".stream",
    "rls_update_chunked": ".stream",
    "predict": ".stream",
    # compensation
    "ResidueLabels": ".compensation",
    "compute_residue": ".compensation",
    "apply_plc": ".compensation",
    "fit_base_comp": ".compensation",
    "dac_update": ".compensation",
    # learner
    "LearnerConfig": ".learner",
    "LearnerState": ".learner",
    "init_base": ".learner",
    "learn_phase": ".learner",
    "predict_combined": ".learner",
    "classify": ".learner",
    "save_checkpoint": ".learner",
    "load_checkpoint": ".learner",
    "with_comp_ratio": ".learner",
    # evaluation
    "EvaluationReport": ".evaluation",
    "PhaseResult": ".evaluation",
    "run_protocol": ".evaluation",
    "evaluate_cumulative": ".evaluation",
    "sweep_comp_ratio": ".evaluation",
    "write_report_json": ".evaluation",
    "write_report_csv": ".evaluation",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name: str):
    module = _EXPORTS.get(name)
    if module is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    return getattr(import_module(module, __name__), name)


def __dir__():
    return __all__
