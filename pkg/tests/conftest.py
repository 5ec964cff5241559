import sys

import numpy as np
import pytest

from helpers import line


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line_ in lines:
            terminalreporter.write_line(line_)


@pytest.fixture
def line4():
    return line(4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
