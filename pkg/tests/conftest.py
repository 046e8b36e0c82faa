import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synthetic import face_model, random_model, write_golden_statismo  # noqa: E402


@pytest.fixture(scope="session")
def golden_bytes():
    return write_golden_statismo()


@pytest.fixture(scope="session")
def golden_prescaled_bytes():
    return write_golden_statismo(prescaled=True)


@pytest.fixture()
def small_model():
    return random_model(seed=42, n_vertices=10, n_components=4)


@pytest.fixture(scope="session")
def face():
    return face_model()
