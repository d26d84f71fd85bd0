import numpy as np
import pytest

from src.materials.response import synthetic_response
from src.utils.config import NumericsConfig


@pytest.fixture
def fourfold_response():
    """(1 + cos(4 theta)/2) exp(-q): harmonics only at m = 0 and +-4."""
    return synthetic_response(
        "fourfold",
        lambda q, theta: (1.0 + 0.5 * np.cos(4.0 * theta)) * np.exp(-q),
        symmetry_order=4,
        inversion_symmetric=True,
    )


@pytest.fixture
def polar_response():
    """(1 + 0.3 cos theta) exp(-q): no inversion symmetry, harmonics at m = 0 and +-1."""
    return synthetic_response("polar", lambda q, theta: (1.0 + 0.3 * np.cos(theta)) * np.exp(-q))


@pytest.fixture
def dipole_response():
    """cos(theta) exp(-q): odd under inversion, so only odd channels survive."""
    return synthetic_response("dipole", lambda q, theta: np.cos(theta) * np.exp(-q))


@pytest.fixture
def isotropic_response():
    return synthetic_response("isotropic", lambda q, theta: np.exp(-q) * np.ones_like(theta), isotropic=True, inversion_symmetric=True)


@pytest.fixture
def light_numerics():
    """Coarse grids that keep the frequency-resolved tests fast."""
    return NumericsConfig(q_nodes=64, theta_nodes=32, truncation=2)
