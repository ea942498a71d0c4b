import numpy as np
import pytest

from wrinklevar.constitutive import MaterialParams


@pytest.fixture
def params():
    return MaterialParams()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def embed(H=None, gradw=(0.0, 0.0)):
    F = np.zeros((3, 2))
    F[:2] = np.eye(2) if H is None else H
    F[2] = gradw
    return F
