import numpy as np
import pytest

from msscan.light_source import DriverVariant, active_emission, new_source, rotate_to
from msscan.scanner import build_test_document
from msscan.spectral import DEFAULT_GRID, led_table

EXAMPLE_TILE = [[1, 0, 1], [0, 1, 0]]


def emission_at(position, leds=None, dimming=None):
    state = new_source(DriverVariant.HIGH_VOLTAGE, leds or led_table())
    _, state = rotate_to(state, position)
    if dimming is not None:
        from msscan.light_source import set_dimming
        state = set_dimming(state, dimming)
    return active_emission(state, DEFAULT_GRID)


@pytest.fixture(scope="session")
def grid():
    return DEFAULT_GRID


@pytest.fixture(scope="session")
def emissions():
    """Emission spectra of the six table LEDs, keyed by name."""
    return {led.name: emission_at(i + 1) for i, led in enumerate(led_table())}


@pytest.fixture(scope="session")
def demo_doc():
    return build_test_document(600, 800, 64, 48, EXAMPLE_TILE)


@pytest.fixture(scope="session")
def small_doc():
    return build_test_document(120, 96, 32, 24, EXAMPLE_TILE)


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)
