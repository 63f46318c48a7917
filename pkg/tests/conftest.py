import numpy as np
import pytest

from rpnsel.channel import SceneConfig, generate_channel, normalize_channel
from rpnsel.topology import build_toroid

RHO = 10 ** (-5 / 10)


def random_hpd(rng, n, spread=1.0):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return A @ A.conj().T * spread + np.eye(n)


def random_channel(rng, n_sub, n_tx, n_users):
    shape = (n_sub, n_tx, n_users)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def channel64():
    return normalize_channel(generate_channel(SceneConfig(n_subcarriers=8, n_users=8, seed=3)))


@pytest.fixture(scope="session")
def toroid64():
    return build_toroid(4, 16)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
