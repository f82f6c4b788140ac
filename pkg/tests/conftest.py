import numpy as np
import pytest

from robgeo import _backend


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=_backend.available())
def backend(request):
    """Run a test once per available kernel backend."""
    previous = _backend.set_backend(request.param)
    yield request.param
    _backend.set_backend(previous)
