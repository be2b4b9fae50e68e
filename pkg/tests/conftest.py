import numpy as np
import pytest

from gatedcat import FockDensity


def random_density(rng: np.random.Generator, n: int) -> FockDensity:
    """Random full-rank density matrix (Wishart normalized)."""
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    m = a @ a.conj().T
    return FockDensity(m / np.trace(m).real)


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


@pytest.fixture
def make_density():
    return random_density
