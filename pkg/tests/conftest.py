import numpy as np
import pytest

from acsep import Barrier, Mesh1D, NoiseSpec, PotentialSpec, SolverConfig


@pytest.fixture(scope="session")
def log_potential():
    return PotentialSpec.logarithmic(1.0, 2.0)


@pytest.fixture(scope="session")
def barrier3():
    return Barrier(sigma=3)


@pytest.fixture(scope="session")
def mesh128():
    return Mesh1D(length=1.0, n_interior=128)


@pytest.fixture(scope="session")
def mesh32():
    return Mesh1D(length=1.0, n_interior=32)


@pytest.fixture(scope="session")
def noise_default():
    return NoiseSpec(sigma=3, n_modes=16, epsilon=1.0)


@pytest.fixture(scope="session")
def noise_off():
    return NoiseSpec(sigma=3, n_modes=16, epsilon=0.0)


@pytest.fixture
def fast_config():
    return SolverConfig(t_final=0.01, dt=5e-4, lam=1e-4, p=2.0)


def sine_profile(mesh, delta0):
    return (1.0 - delta0) * np.sin(np.pi * mesh.nodes() / mesh.length)


@pytest.fixture
def u0_half(mesh32):
    return sine_profile(mesh32, 0.5)
