import os

import numpy as np
import pytest
from hypothesis import settings

from homoglab.coefficients import ProblemSpec, constant_table, fixture_a, fixture_b

settings.register_profile("default", max_examples=40, deadline=None)
settings.register_profile("ci", max_examples=15, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def const1():
    return constant_table()


@pytest.fixture(scope="session")
def fixA():
    return fixture_a()


@pytest.fixture(scope="session")
def fixB():
    return fixture_b()


@pytest.fixture
def spec_small():
    return ProblemSpec(1, 1.5, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
