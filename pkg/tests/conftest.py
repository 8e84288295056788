import warnings

import numpy as np
import pytest

from qudit_cdd.dressing import Bichromatic, Monochromatic
from qudit_cdd.physics import LevelScheme, ZeemanParams

TWO_PI = 2 * np.pi


@pytest.fixture
def params():
    return ZeemanParams.reference()


@pytest.fixture
def scheme():
    return LevelScheme.full()


@pytest.fixture
def bichromatic():
    return Bichromatic(TWO_PI * 3.3e3)


@pytest.fixture
def monochromatic(params):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Monochromatic.from_raman_rabi(TWO_PI * 1.5e3, params)
