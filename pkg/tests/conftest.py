from __future__ import annotations

import numpy as np
import pytest

from dp_lab.grid import Grid


@pytest.fixture(scope="session")
def grid():
    """Default box [-40, 40) with 2^14 nodes."""
    return Grid()


@pytest.fixture(scope="session")
def coarse_grid():
    return Grid(40.0, 2048)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict(request):
    """Record and echo one PASS/FAIL line for an acceptance criterion."""
    reporter = request.config.pluginmanager.getplugin("terminalreporter")

    def emit(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
