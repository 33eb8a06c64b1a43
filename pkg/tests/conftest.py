import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ffbspca.basis import build_basis, radial_table
from ffbspca.polarft import make_polar_grid

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def spec_30():
    return build_basis(0.5, 30)


@pytest.fixture(scope="session")
def grid_30():
    return make_polar_grid(0.5, 30)


@pytest.fixture(scope="session")
def spec_60():
    return build_basis(0.5, 60)


@pytest.fixture(scope="session")
def grid_60():
    return make_polar_grid(0.5, 60)


@pytest.fixture(scope="session")
def table_60(spec_60, grid_60):
    return radial_table(spec_60, grid_60.xi, grid_60.weights)


@pytest.fixture(scope="session")
def small_spec():
    return build_basis(0.5, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(number, ok, detail)."""

    def record(number, ok, detail):
        _CRITERIA[number] = (bool(ok), detail)
        print(f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}")
