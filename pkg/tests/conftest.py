import math
import warnings

import numpy as np
import pytest

from evth.grid import GridSpec
from evth.oracles import KasnerParams

warnings.filterwarnings("ignore", module="numba")

KP = KasnerParams.from_p1p2(2.0 / 3.0, 2.0 / 3.0)
LN2 = math.log(2.0)


def flat_metric(grid, scale=1.0):
    g = np.zeros((6,) + grid.shape)
    g[0] = g[3] = g[5] = scale
    return g


def random_spd(rng, shape, spread=0.3):
    """Symmetric positive-definite field ``I + spread * A A^T``-like, condition <= ~2."""
    a = spread * rng.standard_normal((3, 3) + shape)
    m = np.einsum("ik...,jk...->ij...", a, a)
    for i in range(3):
        m[i, i] += 1.0
    return np.stack([m[0, 0], m[0, 1], m[0, 2], m[1, 1], m[1, 2], m[2, 2]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid8():
    return GridSpec(8)


@pytest.fixture
def grid16():
    return GridSpec(16)
