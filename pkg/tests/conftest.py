import numpy as np
import pytest

from ratsemigroup.catalog import get_example


@pytest.fixture(scope="session")
def pm2():
    return get_example("pm2").multimap


@pytest.fixture(scope="session")
def cantor3():
    return get_example("cantor3").multimap


@pytest.fixture(scope="session")
def cantor3x3():
    return get_example("cantor3x3").multimap


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
