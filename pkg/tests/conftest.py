import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from wattsplit.ingest import PowerSeries


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def series(values, start=0, period=60):
    return PowerSeries(start_time=start, period=period, values=np.asarray(values, dtype=np.float32))


@pytest.fixture
def make_series():
    return series
