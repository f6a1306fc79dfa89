import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def cramer2(m, b):
    """Independent 2x2 solve by Cramer's rule (complex)."""
    det = m[0][0] * m[1][1] - m[0][1] * m[1][0]
    x0 = (b[0] * m[1][1] - m[0][1] * b[1]) / det
    x1 = (m[0][0] * b[1] - b[0] * m[1][0]) / det
    return np.array([x0, x1])
