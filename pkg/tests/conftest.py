import pytest

from curvstab.sphere_grid import build_grid


@pytest.fixture(scope="session")
def grid3():
    return build_grid(3, (12, 12, 24))


@pytest.fixture(scope="session")
def grid3_fine():
    return build_grid(3, (24, 24, 48))


@pytest.fixture(scope="session")
def grid4():
    return build_grid(4, (8, 8, 8, 16))
