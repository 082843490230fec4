import numpy as np
import pytest

import decmaxwell as dm
from decmaxwell import meshgen


@pytest.fixture(scope="session")
def icosphere1():
    surface = meshgen.icosphere(1)
    return surface, dm.build_dual(surface)


@pytest.fixture(scope="session")
def icosphere2():
    surface = meshgen.icosphere(2)
    return surface, dm.build_dual(surface)


@pytest.fixture(scope="session")
def grid12():
    surface = meshgen.square_grid(12, 1.0 / 12)
    return surface, dm.build_dual(surface)


@pytest.fixture(scope="session")
def equilateral_pair():
    h3 = np.sqrt(3.0) / 2.0
    surface = dm.build_complex(
        [(0, 0, 0), (1, 0, 0), (0.5, h3, 0), (1.5, h3, 0)],
        [[0, 1, 2], [1, 3, 2]],
    )
    return surface, dm.build_dual(surface)


@pytest.fixture(scope="session")
def single_equilateral():
    surface = dm.build_complex(
        [(0, 0, 0), (1, 0, 0), (0.5, np.sqrt(3.0) / 2.0, 0)], [[0, 1, 2]]
    )
    return surface, dm.build_dual(surface)
