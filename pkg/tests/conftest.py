import numpy as np
import pytest

from dcgan.datasets import OpinionParams, simulate_opinion
from dcgan.signature import PathBatch, PathSample


@pytest.fixture(scope="session")
def small_opinion():
    return simulate_opinion(OpinionParams(n_particles=128, seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_path(rng, n_points=8, dim=2, scale=1.0):
    t = np.cumsum(rng.uniform(0.1, 1.0, n_points))
    return PathSample(t, rng.normal(scale=scale, size=(n_points, dim)))


def random_batch(rng, M=16, n_points=11, dim=1):
    t = np.linspace(0.0, 1.0, n_points)
    return PathBatch(t, np.cumsum(rng.normal(scale=0.3, size=(M, n_points, dim)), axis=1))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
