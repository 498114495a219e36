import numpy as np
import pytest

from robust_qsl.algebra import RobustnessOrder, assemble_generator

ORDERS_UP_TO_33 = [RobustnessOrder(a, b) for a in range(4) for b in range(4)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(params=[(0, 0), (1, 0), (0, 1), (1, 1), (2, 1)], ids=lambda o: f"order{o[0]}{o[1]}")
def gen(request):
    return assemble_generator(RobustnessOrder(*request.param), np.pi)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k)):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
