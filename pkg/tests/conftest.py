import pytest

from tsnpart.netgraph import line_network, with_end_devices
from tsnpart.timing import TimingConfig

# Line network b1..b5 with end device e_i on b_i: bridges are 0..4, e_i is 4 + i.


def e(i: int) -> int:
    return 4 + i


def b(i: int) -> int:
    return i - 1


@pytest.fixture(scope="session")
def line5():
    return line_network(5)


@pytest.fixture(scope="session")
def grid2():
    # 0-1 / | | / 2-3, end devices 4..7
    return with_end_devices("grid2", 4, [(0, 1), (0, 2), (1, 3), (2, 3)])


@pytest.fixture
def timing():
    return TimingConfig()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.REPORT):
        terminalreporter.write_line(line)
