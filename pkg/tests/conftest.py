import numpy as np
import pytest

from resflow import config as _cfg


@pytest.fixture
def f64():
    with _cfg.precision("f64"):
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
