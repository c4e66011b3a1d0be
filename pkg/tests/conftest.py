import numpy as np
import pytest

from jcrsim.waveform import default_params, desk_params


@pytest.fixture(scope="session")
def table_params():
    """Full-size nominal parameter set (1024 x 128, 4 tx, 16 rx)."""
    return default_params()


@pytest.fixture(scope="session")
def small_params():
    """Fast test dimensions: 128 x 32, 4 tx, 4 rx, same timings."""
    return desk_params(f_s=2.5e6, n_c=32)


@pytest.fixture(scope="session")
def desk():
    """Desk-scale dimensions used by the acceptance loopback (256 x 64 x 4)."""
    return desk_params()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
