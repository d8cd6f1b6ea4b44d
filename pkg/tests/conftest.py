# Bitwise reproducibility (checkpoint resume, chunking identity, C=0
# equivalence) only holds with deterministic kernel reduction order, so the
# whole suite runs single-threaded. Must happen before numpy's first import.
import os

for _var in (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
):
    os.environ[_var] = "1"

import numpy as np
import pytest

from dsal.store import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """20 classes, base 10 + 5 phases of 2, with a matching test split."""
    out = tmp_path_factory.mktemp("synth-small")
    spec = SyntheticSpec(
        classes=20, per_class=30, d_cnn=16, spread=0.8, seed=7, phases=5, test_per_class=10
    )
    train, test = generate_synthetic(spec, out)
    return train, test


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
