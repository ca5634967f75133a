import numpy as np
import pytest

from logconcave import _backend


@pytest.fixture(params=_backend.available_backends())
def backend(request):
    """Run a test once per available kernel backend."""
    previous = _backend.current_backend()
    _backend.use_backend(request.param)
    yield request.param
    _backend.use_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
