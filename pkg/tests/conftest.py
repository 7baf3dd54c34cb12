import numpy as np
import pytest

from eitcnot.hamiltonian import PhysicalParams, build_model
from eitcnot.hilbert import LevelScheme, StateVector
from eitcnot.transport import build_square_geometry


def random_vector(dim, rng, norm=1.0):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return norm * v / np.linalg.norm(v)


def random_state(scheme: LevelScheme, rng) -> StateVector:
    return StateVector(scheme, random_vector(scheme.dim, rng))


def make_model(num_targets=1, a=5.0, omega_p_mhz=70.0, n_cycles=1, t_gap=1.09, decay=True, drives=True):
    params = PhysicalParams(omega_p_peak=2 * np.pi * omega_p_mhz, omega_c=2.5 * 2 * np.pi * omega_p_mhz)
    if not decay:
        params = params.without_decay()
    geom = build_square_geometry(60.0, a, num_targets=num_targets)
    return build_model(params, geom, t_gap=t_gap, n_cycles=n_cycles, drives=drives)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def model1():
    return make_model(1)


@pytest.fixture(scope="session")
def model2():
    return make_model(2)


@pytest.fixture(scope="session")
def model4():
    return make_model(4)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
