from pathlib import Path

import pytest

from h2cqm.mesh import load_mesh, make_sphere

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def tetra():
    return load_mesh(DATA / "tetrahedron.off")


@pytest.fixture(scope="session")
def cube():
    return load_mesh(DATA / "cube.off")


@pytest.fixture(scope="session")
def sphere0():
    return make_sphere(0)


@pytest.fixture(scope="session")
def sphere1():
    return make_sphere(1)


@pytest.fixture(scope="session")
def sphere2():
    return make_sphere(2)


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
