import numpy as np
import pytest

from stepgl import spectral1d


@pytest.fixture(scope="session")
def theta0():
    """De Gennes constant, computed once per session (also fills the cache)."""
    curve = spectral1d.compute_theta0(1e-6)
    return curve.minimum


@pytest.fixture(autouse=True)
def _seed_numpy():
    np.random.seed(0)
