import pytest

from hmdim import SANOV, FreeGroup, SL2Group, StepDistribution

# filled by test_acceptance, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def F2():
    return FreeGroup(2)


@pytest.fixture(scope="session")
def F3():
    return FreeGroup(3)


@pytest.fixture(scope="session")
def srw(F2):
    return StepDistribution.simple(F2)


@pytest.fixture(scope="session")
def biased(F2):
    return StepDistribution(F2, {"a": 0.4, "A": 0.1, "b": 0.25, "B": 0.25})


@pytest.fixture(scope="session")
def sanov():
    return SL2Group(list(SANOV))


@pytest.fixture(scope="session")
def sanov_srw(sanov):
    return StepDistribution.simple(sanov)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
