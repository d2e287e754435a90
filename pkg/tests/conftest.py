import pytest

from kdsim.params import ExperimentConfig, NumericalGrid, PlaneGrid

# Lines printed by the acceptance module, repeated in the terminal summary so
# they survive output capturing.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_grid():
    """Coarse but sampling-valid grid for fast chain tests."""
    return NumericalGrid(
        source=PlaneGrid(524.288e-6, 65536),
        slit=PlaneGrid(16.384e-6, 16384),
        plate=PlaneGrid(8.192e-6, 8192),
        laser=PlaneGrid(32.768e-6, 16384),
        screen=PlaneGrid(2.048e-3, 8192),
        source_points=33,
    )


@pytest.fixture(scope="session")
def base_cfg():
    return ExperimentConfig()
