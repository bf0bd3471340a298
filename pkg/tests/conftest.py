import numpy as np
import pytest

from recirc.model import DEFAULT_PLANT, NOMINAL_KINETICS


@pytest.fixture(scope="session")
def theta():
    return NOMINAL_KINETICS


@pytest.fixture(scope="session")
def plant():
    return DEFAULT_PLANT


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
