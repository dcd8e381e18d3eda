import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gabprate.generators import example1, example2
from gabprate.system import SparseSystem
from helpers import TWO_NODE_A, WEAK_3_A

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def two_node():
    return SparseSystem.from_dense(TWO_NODE_A, [1.0, 1.0])


@pytest.fixture
def weak3():
    return SparseSystem.from_dense(WEAK_3_A, [1.0, 2.0, 3.0])


@pytest.fixture
def ex1():
    return example1()


@pytest.fixture
def ex2():
    return example2()


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[number])
