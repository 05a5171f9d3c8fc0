import numpy as np
import pytest

from nlrtest.model import get_model

# lines appended by test_acceptance, echoed at the end of the run
ACCEPTANCE_LINES = []


@pytest.fixture
def halfnormal():
    return get_model("halfnormal")


@pytest.fixture
def offset_model():
    return get_model("offset-truncnormal:1.25")


@pytest.fixture
def toy():
    return get_model("toy-covariate")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
