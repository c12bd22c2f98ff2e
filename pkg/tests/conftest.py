import numpy as np
import pytest

from tfouter import GeometryParams, TFGrid, build_generators


@pytest.fixture(scope="session")
def geom():
    return GeometryParams()


@pytest.fixture(scope="session")
def gen(geom):
    return build_generators(geom)


@pytest.fixture(scope="session")
def small_grid():
    # y lattice doubles as the periodic z lattice (period 4, dz = 0.25)
    return TFGrid((-2.0, 2.0), 16, (-2.0, 2.0), 8, (0.3, 1.2), 4)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
