import sys
from pathlib import Path

import pytest

import volspec as vs

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def table1_model():
    return vs.load_model(vs.bundled_config("table1_calibrated"))


@pytest.fixture(scope="session")
def nojump_model():
    return vs.load_model(vs.bundled_config("nojump_simple"))


@pytest.fixture(scope="session")
def table1_nojump_model():
    return vs.load_model(vs.bundled_config("table1_nojump"))
