import numpy as np
import pytest

from jumpnls import spectral


@pytest.fixture(scope="session")
def torus_model():
    """2*pi torus holding levels up to 8 (plenty for every test here)."""
    return spectral.build_spectral_model(spectral.torus_1d(2 * np.pi), beta=1.0, max_level=8)


@pytest.fixture(scope="session")
def dirichlet_model():
    return spectral.build_spectral_model(spectral.interval_dirichlet(np.pi), beta=1.0, max_level=6)


@pytest.fixture(scope="session")
def neumann_model():
    return spectral.build_spectral_model(spectral.interval_neumann(np.pi), beta=1.0, max_level=6)


@pytest.fixture(scope="session")
def torus2d_model():
    return spectral.build_spectral_model(
        spectral.torus_2d(2 * np.pi, 2 * np.pi), beta=1.0, max_level=5
    )


def random_state(rng, dim, scale=1.0):
    return scale * (rng.standard_normal(dim) + 1j * rng.standard_normal(dim))
