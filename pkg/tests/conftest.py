import numpy as np
import pytest
from hypothesis import settings

from fhr.grid import Grid
from fhr.params import DEMO_PARAMS, validate

settings.register_profile("fhr", max_examples=60, deadline=None)
settings.load_profile("fhr")


@pytest.fixture(scope="session")
def demo():
    """Demonstration constants (here ``q = delta*d``, so M is degenerate)."""
    return validate(DEMO_PARAMS)


@pytest.fixture(scope="session")
def nondegenerate():
    """Demonstration constants with ``a = 0.02``: all rates distinct, q = a."""
    return validate(DEMO_PARAMS.with_(a=0.02))


@pytest.fixture(scope="session")
def small_grid():
    return Grid(-10.0, 10.0, 101, 1.0, 41)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def record_criterion():
    """Record one acceptance line ``PASS|FAIL criterion N: title -- detail``."""
    def record(number, title, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {title} -- {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
