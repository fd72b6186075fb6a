import numpy as np
import pytest

from mdpdual.core import TabularMDP
from mdpdual.generators import chain, garnet_suite

ACCEPTANCE_LINES = []


def one_state(R):
    R = np.atleast_2d(np.asarray(R, dtype=float))
    return TabularMDP(np.ones(R.shape + (1,)), R)


def random_mdp(rng, S, A, full_support=True):
    P = rng.random((S, A, S)) + (0.05 if full_support else 0.0)
    P /= P.sum(axis=2, keepdims=True)
    return TabularMDP(P, rng.random((S, A)))


def random_policy(rng, S, A):
    w = rng.random((S, A)) + 0.05
    return w / w.sum(axis=1, keepdims=True)


@pytest.fixture
def toggle():
    return chain(2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def suite():
    return garnet_suite(100)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
