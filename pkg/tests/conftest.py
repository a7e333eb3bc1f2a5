import numpy as np
import pytest

from setobs import builtin_scenario, simulate


@pytest.fixture(scope="session")
def ex1_run():
    return simulate(builtin_scenario("example1"))


@pytest.fixture(scope="session")
def ex2_run():
    return simulate(builtin_scenario("example2"))


@pytest.fixture(scope="session")
def ex2_noisy_run():
    sc = builtin_scenario("example2")
    return simulate(sc, seed=1, noise=sc.expected["noise"])


def _tank(name, noisy):
    sc = builtin_scenario(name)
    return simulate(sc, seed=7, noise=sc.expected["noise"] if noisy else 0.0)


@pytest.fixture(scope="session")
def tank1_run():
    return _tank("tank1", False)


@pytest.fixture(scope="session")
def tank2_run():
    return _tank("tank2", False)


@pytest.fixture(scope="session")
def tank1_noisy_run():
    return _tank("tank1", True)


@pytest.fixture(scope="session")
def tank2_noisy_run():
    return _tank("tank2", True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
