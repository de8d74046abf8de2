"""Shared fixtures and the acceptance summary."""

import pytest

from csym_rd.catalog import catalog_physical
from csym_rd.pdelab import benchmark_family, convergence_study

_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def benchmark_study():
    """The smooth S-c13 convergence study (n = 64, 128, 256), run once per session."""
    fam = benchmark_family()
    system = catalog_physical("S-c13", {"beta": 2.0, "k": 1.0, "alpha1": 1.0, "alpha2": 1.0})
    return convergence_study(system, fam, grids=(64, 128, 256), x_range=(0.0, 0.5),
                             t_start=0.0, t_end=0.25)


@pytest.fixture
def acceptance():
    """Record ``(criterion, passed, detail)``; the line is printed as it is recorded."""

    def record(criterion, passed, detail=""):
        line = f"Criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
        _ACCEPTANCE[criterion] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[key])
