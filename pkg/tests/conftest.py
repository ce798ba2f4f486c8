import numpy as np
import pytest

from cransim.scenario import profile_config


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def desk():
    return profile_config("desk")


@pytest.fixture
def tiny():
    """Two cells, two users each, four antennas per RRH; a few trials only."""
    return profile_config("desk", K=2, N_R=4, trials=3, packets=2, symbols_per_packet=50,
                          snr_db_list=(0.0, 10.0), bits_list=(3,),
                          receiver_list=("FR_MMSE_SIC", "LRA_MMSE", "AGC_LRA_MMSE_SIC"))
