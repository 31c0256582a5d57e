import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_state(rng, n, chi=2):
    v = rng.standard_normal(chi ** n) + 1j * rng.standard_normal(chi ** n)
    return v / np.linalg.norm(v)


def random_density(rng, n, chi=2, rank=3):
    a = rng.standard_normal((chi ** n, rank)) + 1j * rng.standard_normal((chi ** n, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho)
