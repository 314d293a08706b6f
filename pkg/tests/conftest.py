import pytest

from softguide.config import RunConfig
from softguide.system import build_model
from softguide.transverse import TransverseProfile, solve_modes


@pytest.fixture(scope="session")
def profile5():
    return TransverseProfile.constant(2.0, 5.0)


@pytest.fixture(scope="session")
def modes5(profile5):
    return solve_modes(profile5)


@pytest.fixture(scope="session")
def model():
    """Default configuration: alpha=5, d=2 strip and a beta=4 unit disk trap (one open channel)."""
    return build_model(RunConfig())


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion before asserting it."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
