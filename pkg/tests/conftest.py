import numpy as np
import pytest

from mris import fixtures


@pytest.fixture(scope="session")
def canonical():
    """Two-temperature qubit workhorse (hot/cold probes, mixing chain)."""
    return fixtures.two_temperature_qubit()


@pytest.fixture(scope="session")
def equilibrium():
    return fixtures.equilibrium_qubit(beta=1.0)


@pytest.fixture(scope="session")
def tri_broken():
    return fixtures.tri_broken_qubit()


@pytest.fixture(scope="session")
def decoupled():
    return fixtures.decoupled_qubit()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_density(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def random_unitary(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))
