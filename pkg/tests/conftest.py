from __future__ import annotations

import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import acceptance_report
from qconv.data import Dataset, load_dataset

REPO_ROOT = Path(__file__).resolve().parent.parent

# Set QCONV_MNIST_DIR to a directory holding the four classic IDX files to
# run the data-dependent tests on the real thing; otherwise a bundled
# handwritten-digits stand-in with the same shape and format is generated.
MNIST_ENV = "QCONV_MNIST_DIR"


@pytest.fixture(scope="session")
def idx_dir(tmp_path_factory) -> Path:
    env_dir = os.environ.get(MNIST_ENV)
    if env_dir:
        return Path(env_dir)
    out = tmp_path_factory.mktemp("digits_idx")
    subprocess.run(
        [sys.executable, str(REPO_ROOT / "scripts" / "make_digits_idx.py"), str(out)],
        check=True,
        capture_output=True,
    )
    return out


@pytest.fixture(scope="session")
def idx_paths(idx_dir) -> dict[str, Path]:
    return {
        "train_images": idx_dir / "train-images-idx3-ubyte",
        "train_labels": idx_dir / "train-labels-idx1-ubyte",
        "test_images": idx_dir / "t10k-images-idx3-ubyte",
        "test_labels": idx_dir / "t10k-labels-idx1-ubyte",
    }


@pytest.fixture(scope="session")
def train_pool(idx_paths) -> Dataset:
    return load_dataset(idx_paths["train_images"], idx_paths["train_labels"])


@pytest.fixture()
def tiny_dataset() -> Dataset:
    rng = np.random.default_rng(11)
    return Dataset(rng.random((10, 8, 8)), np.arange(10) % 10)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = acceptance_report.lines()
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
