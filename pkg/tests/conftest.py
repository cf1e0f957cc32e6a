import numpy as np
import pytest

from fastslow.coefficients import make_field
from fastslow.drivers import gen_coupled, gen_driver

TRIG = dict(amplitude=0.3, offset=0.5, drift_amplitude=0.1, drift_offset=0.1, box=(-50, 50))
MA1 = {"D": 1, "theta": 0.5}


@pytest.fixture
def trig_field():
    return make_field("trig1d", **TRIG)


@pytest.fixture
def ma1_driver():
    return gen_driver("ma1", 0, 256, 1.0, MA1)


@pytest.fixture
def coupled_ma1():
    return gen_coupled(0, 128, 1.0, "ma1", MA1, 16)


def random_path(rng, n, d=1):
    return np.cumsum(rng.standard_normal((n, d)), axis=0)
