import numpy as np
import pytest

from lossyckpt import sparse


@pytest.fixture(scope="session")
def poisson16():
    a, b = sparse.generate_poisson2d(16)
    return a, sparse.jacobi_preconditioner(a), b


@pytest.fixture(scope="session")
def poisson8():
    a, b = sparse.generate_poisson2d(8)
    return a, sparse.jacobi_preconditioner(a), b


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240801)
