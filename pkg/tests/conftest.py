import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mfcube import fileio, fixtures  # noqa: E402


def complex_of(name, *params):
    return fileio.read_complex(fixtures.generate_fixture(name, *params))


def vid(X, label):
    return X.index[tuple(label) if isinstance(label, list) else label]


@pytest.fixture(scope="session")
def grid22():
    return complex_of("grid", 2, 2)


@pytest.fixture(scope="session")
def torus():
    return complex_of("torus")
