import numpy as np
import pytest

from oralab.grid import Grid


@pytest.fixture
def grid():
    return Grid(-4.0, 5.0, 900)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
