import numpy as np
import pytest

from mcqr.core_math import RngStream


@pytest.fixture
def rng():
    return RngStream(12345)


def random_spd(gen, d):
    A = gen.standard_normal((d, d))
    return A @ A.T + 0.1 * np.eye(d)
