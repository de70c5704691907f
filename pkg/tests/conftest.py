import numpy as np
import pytest

from gustlab.dynamics import VehicleParams


@pytest.fixture
def params() -> VehicleParams:
    return VehicleParams()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
