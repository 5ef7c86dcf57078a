import numpy as np
import pytest

from heisvp import bumpy
from heisvp.field import GridField, PolyField


@pytest.fixture(scope="session")
def standard_surface():
    """The (alpha, rho, layers) = (2, 8, 3) bumpy surface, built once per session."""
    return bumpy.build(bumpy.BumpyParams(alpha=2, rho=8, layers=3))


@pytest.fixture(scope="session")
def small_surface():
    return bumpy.build(bumpy.BumpyParams(alpha=2, rho=8, layers=2))


@pytest.fixture
def linear_z():
    return PolyField.affine(0.0, 0.0, 1.0)


@pytest.fixture(scope="session")
def wave_grid():
    return GridField.from_function(
        lambda x, z: 0.15 * np.sin(2 * np.pi * x) * np.sin(2 * np.pi * z), 64, 64, (0, 1, 0, 1),
        periodic=True, interp="bicubic",
    )


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
