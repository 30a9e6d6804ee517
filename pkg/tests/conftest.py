import numpy as np
import pytest

from fracsse import qnoise, sse
from fracsse.magschrod import WaveField

BOX = 8.0 * np.pi


def gaussian_packet(grid_points: int, box: float = BOX,
                    carrier: float = 1.0) -> WaveField:
    x = np.arange(grid_points) * (box / grid_points)
    width = box / 16.0
    values = np.exp(-(x - box / 2) ** 2 / (2 * width ** 2)) \
        * np.exp(1j * carrier * x)
    psi = WaveField(values, box)
    return WaveField(psi.values / psi.l2_norm(), box)


@pytest.fixture(scope="session")
def small_spectrum():
    return qnoise.build_spectrum(1, BOX, 16)


@pytest.fixture(scope="session")
def small_field(small_spectrum):
    times = sse.stage_times(0.25, 2.0 ** -8)
    return qnoise.sample_field(small_spectrum, 0.75, times, 42, 128)


@pytest.fixture(scope="session")
def zero_field(small_spectrum):
    times = sse.stage_times(0.25, 2.0 ** -8)
    return qnoise.zero_field(small_spectrum, 0.75, times, 128)


@pytest.fixture()
def packet():
    return gaussian_packet(128)
