import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from boussinesq_lab.spectral import FourierGrid, SpectralField, fftn, leray_project

settings.register_profile(
    "lab",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("lab")

ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = sorted(config.stash.get(ACCEPTANCE, []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid16():
    return FourierGrid.cube(16)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def random_field(grid, rng, ncomp=4, dealias=True, solenoidal=True):
    c = fftn(rng.standard_normal((ncomp,) + grid.shape))
    if dealias:
        c = c * grid.dealias_mask
    f = SpectralField(grid, c)
    if solenoidal and ncomp == 4:
        f = leray_project(f)
    return f


def single_mode(grid, k, vec):
    """Real field with coefficient ``vec`` at ``k`` and its conjugate at ``-k``."""
    c = np.zeros((len(vec),) + grid.shape, dtype=complex)
    i = grid.mode_index(k)
    j = grid.mode_index(tuple(-x for x in k))
    for n, v in enumerate(vec):
        c[n][i] += v
        c[n][j] += np.conj(v)
    return SpectralField(grid, c)
