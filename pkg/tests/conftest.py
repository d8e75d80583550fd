import numpy as np
import pytest

from fccgan.engine import backend_name, set_backend


@pytest.fixture(params=["numpy", "numba"])
def backend(request):
    """Run the test under each conv-kernel backend."""
    old = backend_name()
    set_backend(request.param)
    yield request.param
    set_backend(old)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
