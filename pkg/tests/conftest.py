import numpy as np
import pytest

from fcid import data as fdata
from fcid.models import KimModel, SquadritoConstants, SquadritoModel

ACCEPTANCE_LINES = []


@pytest.fixture
def squadrito():
    return SquadritoModel(SquadritoConstants(k=2.0, beta=1 / 37.5))


@pytest.fixture
def kim():
    return KimModel()


@pytest.fixture
def sq_truth():
    return np.array([34.2, 2.16, 0.108, 0.016])


@pytest.fixture
def kim_truth():
    return np.array([34.2, 2.16, 0.108, 0.006, 0.25])


def make_dataset(model, truth, n=500, sigma=0.01, seed=0, drift=None):
    return fdata.generate(model, truth, fdata.CurrentProfile(), fdata.NoiseSpec(sigma=sigma, seed=seed),
                          dt=0.101, n=n, drift=drift)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
