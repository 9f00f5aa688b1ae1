import numpy as np
import pytest

from minsurf import build_grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def unit_square():
    return build_grid(2, [(0.0, 1.0), (0.0, 1.0)], (17, 17))


def unit_box(n, counts):
    return build_grid(n, [(0.0, 1.0)] * n, counts)
