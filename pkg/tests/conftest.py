import warnings

import numpy as np
import pytest

warnings.filterwarnings("ignore", message=".*TBB.*")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240808)
