"""The two per-appliance networks and their parameter budget.

State classifier (window W=20): conv(16,k3)-relu-pool2-conv(32,k3)-relu-
pool2-flatten-dense(64)-relu-dense(2)-softmax, 7,970 parameters. Power
regressor: lstm(50)-lstm(50)-dense(1), 30,651 parameters. Together they
stay comfortably inside the 70k-per-appliance budget that keeps a saved
bundle small enough for microcontroller-class deployment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wattsplit.features import LOOKBACK, Scaler
from wattsplit.nn import LSTM, Conv1D, Dense, Flatten, MaxPool1D, Network, ReLU, Softmax
from wattsplit.signature import ApplianceParams, OffStats

PARAM_BUDGET = 70_000  # classifier + regressor, per appliance
REGRESSOR_UNITS = 50


def build_classifier(window_len: int = 20, seed: int = 0) -> Network:
    """Seeded 1D-CNN mapping a (B, W, 1) window batch to 2-class probabilities."""
    length = window_len
    for _ in range(2):
        length = (length - 2) // 2  # conv k=3 then pool 2
    if length < 1:
        raise ValueError(f"window_len {window_len} is too small for the conv/pool stack")
    rng = np.random.default_rng(seed)
    flat = length * 32
    net = Network([
        Conv1D(1, 16, 3, rng=rng),
        ReLU(),
        MaxPool1D(2),
        Conv1D(16, 32, 3, rng=rng),
        ReLU(),
        MaxPool1D(2),
        Flatten(),
        Dense(flat, 64, rng=rng),
        ReLU(),
        Dense(64, 2, rng=rng),
        Softmax(),
    ])
    assert net.param_count() + regressor_param_count() <= PARAM_BUDGET
    return net


def build_regressor(seed: int = 0) -> Network:
    """Seeded stacked LSTM mapping (B, 5, 1) index lookbacks to one scalar."""
    rng = np.random.default_rng(seed)
    return Network([
        LSTM(1, REGRESSOR_UNITS, activation="relu", return_sequences=True, rng=rng),
        LSTM(REGRESSOR_UNITS, REGRESSOR_UNITS, activation="relu", rng=rng),
        Dense(REGRESSOR_UNITS, 1, rng=rng),
    ])


def regressor_param_count() -> int:
    u = REGRESSOR_UNITS
    return 4 * ((1 + u) * u + u) + 4 * ((u + u) * u + u) + (u + 1)


def param_count(network: Network | None) -> int:
    return 0 if network is None else network.param_count()


@dataclass
class ModelBundle:
    """Everything needed to disaggregate one appliance from mains data."""

    appliance: str
    classifier: Network | None
    regressor: Network | None
    mains_scaler: Scaler
    power_scaler: Scaler
    index_scale: float
    params: ApplianceParams
    off_stats: OffStats
    window_len: int = 20
    period: int = 60

    def __post_init__(self):
        total = param_count(self.classifier) + param_count(self.regressor)
        if total > PARAM_BUDGET:
            raise ValueError(f"{self.appliance}: {total} parameters exceed the "
                             f"{PARAM_BUDGET} budget")
        if self.index_scale <= 0:
            raise ValueError("index_scale must be positive")

    def total_params(self) -> int:
        return param_count(self.classifier) + param_count(self.regressor)

    def regressor_input(self, lookback_rows: np.ndarray) -> np.ndarray:
        """Scale integer lookback rows into the regressor's (B, 5, 1) input."""
        x = np.asarray(lookback_rows, dtype=np.float32) / np.float32(self.index_scale)
        return x.reshape(-1, LOOKBACK, 1)
