import pytest

from matchrace import GameConfig, boundary_field, value_iteration
from matchrace.qvi1d import solve_both

# lines collected by tests/test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cfg61():
    return GameConfig(n_cells=60)


@pytest.fixture(scope="session")
def sols61(cfg61):
    return solve_both(cfg61)


@pytest.fixture(scope="session")
def table61(cfg61, sols61):
    return boundary_field(cfg61, solutions=sols61)


@pytest.fixture(scope="session")
def gs61(cfg61, table61):
    """(field, maps, report) of the 61^3 symmetric Gauss-Seidel solve."""
    return value_iteration(cfg61, table61, mode="gauss-seidel")


@pytest.fixture(scope="session")
def jacobi61(cfg61, table61):
    return value_iteration(cfg61, table61, mode="jacobi")


@pytest.fixture(scope="session")
def asym61():
    cfg = GameConfig(n_cells=60, c_B=0.04)
    v, maps, rep = value_iteration(cfg, boundary_field(cfg))
    return cfg, v, maps, rep
