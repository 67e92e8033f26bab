from pathlib import Path

import numpy as np
import pytest

from lspe_bound.chain import load_chain, mixing, stationary_distribution
from lspe_bound.ledger import build_ledger
from lspe_bound.model import build_model, load_basis
from lspe_bound.runner import build_schedule

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "lspe_bound" / "fixtures"
CONFIGS = Path(__file__).resolve().parents[1] / "configs"

ALPHA, LAM = 0.5, 0.9


def fixture(name):
    path = FIXTURES / f"{name}.json"
    return load_chain(path), load_basis(path)


class Setup:
    def __init__(self, name, alpha=ALPHA, lam=LAM):
        self.chain, self.basis = fixture(name)
        self.pi = stationary_distribution(self.chain)
        self.profile = mixing(self.chain, self.pi)
        self.model = build_model(self.chain, self.pi, self.basis, alpha, lam)
        self.schedule = build_schedule(0.5, 0.5, 0.9, 0.5, 0.25)
        self._ledger = None

    @property
    def ledger(self):
        if self._ledger is None:
            self._ledger = build_ledger(self.chain, self.basis, self.model, self.schedule,
                                        self.profile.tau_min)
        return self._ledger


@pytest.fixture(scope="session")
def two_state():
    return Setup("two_state")


@pytest.fixture(scope="session")
def five_state():
    return Setup("five_state")


@pytest.fixture(scope="session")
def iid():
    return Setup("iid_two_state")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_stochastic(rng, s, sparsity=0.0):
    P = rng.random((s, s)) + 0.05
    if sparsity:
        P *= rng.random((s, s)) > sparsity
        P[np.arange(s), (np.arange(s) + 1) % s] += 0.1   # keep a Hamiltonian cycle
    return P / P.sum(axis=1, keepdims=True)


RESULTS = []  # one line per acceptance criterion, filled by test_acceptance


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
