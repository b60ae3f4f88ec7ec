import numpy as np
import pytest

from choquard import build_grid, kernel_table, make_exponents, random_field


@pytest.fixture(scope="session")
def exps3():
    return make_exponents(3, 1.0, 0.5)


@pytest.fixture(scope="session")
def ball9():
    return build_grid("ball", (2.0, 2.0, 2.0), (9, 9, 9))


@pytest.fixture(scope="session")
def ball13():
    return build_grid("ball", (2.0, 2.0, 2.0), (13, 13, 13))


@pytest.fixture(scope="session")
def ball17():
    return build_grid("ball", (2.0, 2.0, 2.0), (17, 17, 17))


@pytest.fixture(scope="session")
def box17():
    return build_grid("box", (1.0, 1.0, 1.0), (17, 17, 17))


@pytest.fixture(scope="session")
def kt9(ball9):
    return kernel_table(ball9, 1.0)


@pytest.fixture(scope="session")
def kt13(ball13):
    return kernel_table(ball13, 1.0)


@pytest.fixture(scope="session")
def kt17(ball17):
    return kernel_table(ball17, 1.0)


def rand_field(grid, seed, positive=True):
    rng = np.random.default_rng(seed)
    return random_field(grid, rng, positive=positive)
