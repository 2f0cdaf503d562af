import numpy as np
import pytest

from gyrospec.model import RotorModel

# Fig. 1 caption parameters, used throughout
FIG_K = np.array([[1.0, 1.0], [1.0, 2.0]])
FIG_D = np.array([[-1.0, 0.0], [0.0, 2.0]])


@pytest.fixture
def model1():
    return RotorModel((1.0,))


def random_symmetric(rng, scale=2.0):
    A = rng.uniform(-scale, scale, (2, 2))
    return 0.5 * (A + A.T)


def pairing_distance(a, b):
    """Greedy closest-pair matching distance between equal-size multisets."""
    a = list(np.asarray(a, dtype=complex))
    b = list(np.asarray(b, dtype=complex))
    assert len(a) == len(b)
    worst = 0.0
    while a:
        d = np.abs(np.subtract.outer(a, b))
        i, j = np.unravel_index(np.argmin(d), d.shape)
        worst = max(worst, d[i, j])
        a.pop(i)
        b.pop(j)
    return worst
