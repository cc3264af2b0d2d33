import numpy as np
import pytest

from src.models.containers import OrientationSet
from src.models.params import WaveletParams
from src.services import cakewavelet, sphere


@pytest.fixture(scope="session")
def ico0():
    return sphere.icosphere(0)


@pytest.fixture(scope="session")
def ico1():
    return sphere.icosphere(1)


@pytest.fixture(scope="session")
def ico2():
    return sphere.icosphere(2)


@pytest.fixture(scope="session")
def z_axis_set():
    return OrientationSet.from_directions([[0.0, 0.0, 1.0]])


@pytest.fixture(scope="session")
def stack32(ico1):
    """Crossing-tube parameters on 32^3 with 42 orientations."""
    return cakewavelet.build_wavelet_stack(ico1, WaveletParams(grid=(32, 32, 32)))


@pytest.fixture(scope="session")
def stack16(ico1):
    return cakewavelet.build_wavelet_stack(ico1, WaveletParams(grid=(16, 16, 16)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
