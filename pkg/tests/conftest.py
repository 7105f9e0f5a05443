"""Shared fixtures; the scripts directory is a flat module layout"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / 'scripts'))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def uniform_series(rng):
    """Factory for uniform [0, 1] input series without outputs"""
    from regressor import TimeSeriesDataset

    def make(p: int, N: int):
        return TimeSeriesDataset(rng.uniform(0.0, 1.0, size=(p, N)))

    return make
