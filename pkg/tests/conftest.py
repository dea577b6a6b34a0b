from pathlib import Path

import numpy as np
import pytest

from regret_econ.auction import Mechanism
from regret_econ.regret import BidSequence

FIXTURES = Path(__file__).resolve().parent / "fixtures"


def constant_log(bids, T, mechanism=Mechanism.GSP):
    row = np.asarray(bids, dtype=float)
    return BidSequence(np.tile(row, (T, 1)), tuple(range(1, len(row) + 1)), mechanism)


def random_log(rng, T=20, n=5, mechanism=Mechanism.GSP, integer=True):
    bids = rng.integers(0, 61, size=(T, n)).astype(float) if integer else rng.uniform(0, 60, (T, n))
    return BidSequence(bids, tuple(range(1, n + 1)), mechanism)


@pytest.fixture
def fixtures_dir():
    return FIXTURES
