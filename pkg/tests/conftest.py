import math

import pytest

from biphoton_lab import units
from biphoton_lab.biphoton import FilterSpec, SpectralGrid, build_state, signal_marginal

DL_REF = 0.7506
LAMBDA_SIGNAL_UM = 0.7022
OMEGA_SIGNAL = float(units.omega_from_wavelength(LAMBDA_SIGNAL_UM))


@pytest.fixture(scope="session")
def default_grid():
    return SpectralGrid.default(DL_REF, OMEGA_SIGNAL)


@pytest.fixture(scope="session")
def sinc2_marginal(default_grid):
    return signal_marginal(build_state(default_grid, DL_REF))


@pytest.fixture(scope="session")
def wide_filter():
    return FilterSpec(702.2, 83.0)


def sinc2(x):
    return 1.0 if x == 0 else (math.sin(x) / x) ** 2
