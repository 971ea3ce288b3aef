import time

import pytest

from gridcollab.cli import run_methods
from gridcollab.coordination import ControlMethod
from gridcollab.scenario import bundled_scenario_path

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def bundled_path():
    return bundled_scenario_path()


@pytest.fixture(scope="session")
def bundled_runs(bundled_path):
    """All five methods on the bundled scenario, plus wall-clock seconds."""
    t0 = time.perf_counter()
    runs = run_methods(str(bundled_path), list(ControlMethod))
    return runs, time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
