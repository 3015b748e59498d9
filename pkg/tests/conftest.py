import numpy as np
import pytest
from hypothesis import settings

from fujitalab.manifold import ModelManifold

settings.register_profile("fujitalab", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("fujitalab")


@pytest.fixture(scope="session")
def H3():
    return ModelManifold.hyperbolic(3)


@pytest.fixture(scope="session")
def E3():
    return ModelManifold.euclidean(3)


def blend(r, a=0.5, b=1.5):
    """C^2 quintic step from 0 on [0, a] to 1 on [b, inf)."""
    s = np.clip((np.asarray(r, float) - a) / (b - a), 0.0, 1.0)
    return s**3 * (10 - 15 * s + 6 * s**2)
