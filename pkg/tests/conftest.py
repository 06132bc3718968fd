import math

import pytest

from wedgeheat.geometry import AngularDomain
from wedgeheat.kernel import KernelConfig


@pytest.fixture(scope="session")
def half_plane():
    return AngularDomain(math.pi)


@pytest.fixture(scope="session")
def quadrant():
    return AngularDomain(math.pi / 2)


@pytest.fixture(scope="session")
def reflex():
    return AngularDomain(1.5 * math.pi)


@pytest.fixture(scope="session")
def slit_plane():
    return AngularDomain(2.0 * math.pi)


@pytest.fixture(scope="session")
def half_plane_cfg(half_plane):
    return KernelConfig(half_plane, series_rel_tol=1e-12)


@pytest.fixture(scope="session")
def quadrant_cfg(quadrant):
    return KernelConfig(quadrant, series_rel_tol=1e-12)
