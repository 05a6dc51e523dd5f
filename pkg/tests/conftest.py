import numpy as np
import pytest

from pdwg.mesh import VoxelDomainSpec, build_mesh
from pdwg.spaces import build_dof_map

UNIT_CUBE = VoxelDomainSpec(((0, 0, 0), (1, 1, 1)))

# one line per acceptance criterion, filled by test_acceptance
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cube1():
    return build_mesh(UNIT_CUBE, 1)


@pytest.fixture(scope="session")
def cube2():
    return build_mesh(UNIT_CUBE, 2)


@pytest.fixture(scope="session")
def cube1_dofs(cube1):
    return build_dof_map(cube1)


def random_tet(rng, min_volume=1e-2):
    """A random tetrahedron with a non-negligible volume."""
    while True:
        X = rng.uniform(-1, 1, size=(4, 3))
        if abs(np.linalg.det(X[1:] - X[0])) / 6 > min_volume:
            return X
