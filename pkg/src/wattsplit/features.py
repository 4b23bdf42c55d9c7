"""Model-ready sample construction.

The classifier consumes sliding mains windows labelled at their midpoint;
the regressor consumes the previous five run-length state indices and
predicts the normalized power right now. MinMax scalers are always fit on
training data only; anything outside their range is clamped.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from wattsplit.errors import DataError

log = logging.getLogger(__name__)

LOOKBACK = 5  # regressor input length: the five preceding state indices


@dataclass(frozen=True)
class Scaler:
    """MinMax range: forward maps [x_min, x_max] onto [0, 1]."""

    x_min: float
    x_max: float

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValueError(f"degenerate scaler: x_min={self.x_min} x_max={self.x_max}")


def fit_scaler(values) -> Scaler:
    values = np.asarray(values, dtype=np.float64)
    values = values[~np.isnan(values)]
    if values.size < 2 or values.min() == values.max():
        raise DataError("cannot fit a MinMax scaler on a constant signal")
    return Scaler(x_min=float(values.min()), x_max=float(values.max()))


def scale(x, scaler: Scaler, direction: str = "forward"):
    """Apply x -> (x - x_min) / (x_max - x_min) or its exact inverse.

    Forward inputs are clamped into [x_min, x_max] first; clamping is
    logged rather than raised since test data routinely overshoots the
    training range.
    """
    x = np.asarray(x, dtype=np.float64)
    span = scaler.x_max - scaler.x_min
    if direction == "forward":
        clamped = np.clip(x, scaler.x_min, scaler.x_max)
        n_out = int(np.count_nonzero(clamped != x))
        if n_out:
            log.debug("scale: clamped %d of %d values into [%g, %g]",
                      n_out, x.size, scaler.x_min, scaler.x_max)
        out = (clamped - scaler.x_min) / span
    elif direction == "inverse":
        out = x * span + scaler.x_min
    else:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return out if out.ndim else float(out)


@dataclass
class WindowSet:
    """n sliding mains windows plus the state label of each midpoint sample."""

    windows: np.ndarray  # (n, window_len) float32
    labels: np.ndarray | None  # (n,) int8, None at inference time
    window_len: int

    @property
    def label_offset(self) -> int:
        return self.window_len // 2

    def __len__(self):
        return self.windows.shape[0]


def make_windows(sequence, states, window_len: int = 20) -> WindowSet:
    """Slide a window over the zero-padded sequence, one window per sample.

    Padding puts floor(W/2) zeros before and ceil(W/2) after, so window i
    carries sequence[i] at in-window offset floor(W/2) and gets states[i]
    as its label. Exactly len(sequence) windows come out.
    """
    sequence = np.asarray(sequence, dtype=np.float32)
    if sequence.ndim != 1 or sequence.size < 1:
        raise ValueError("sequence must be a non-empty 1-D array")
    if window_len < 2:
        raise ValueError("window_len must be >= 2")
    if states is not None:
        states = np.asarray(states, dtype=np.int8)
        if states.shape != sequence.shape:
            raise DataError(f"sequence length {sequence.size} != states length {states.size}")
    n = sequence.size
    left = window_len // 2
    right = window_len - left  # ceil(W/2); the extra zero lands on the right for odd W
    padded = np.concatenate([np.zeros(left, np.float32), sequence, np.zeros(right, np.float32)])
    windows = np.lib.stride_tricks.sliding_window_view(padded, window_len)[:n].copy()
    return WindowSet(windows=windows, labels=states, window_len=window_len)


def run_length_index(states) -> np.ndarray:
    """Count consecutive active steps: 0 when off, k on the k-th active step.

    Run lengths are not capped; a long-running appliance keeps counting.
    """
    states = np.asarray(states)
    indices = np.zeros(len(states), dtype=np.int64)
    run = 0
    for t, s in enumerate(states):
        run = run + 1 if s else 0
        indices[t] = run
    return indices


@dataclass
class RegressorSamples:
    """Lookback rows of scaled state indices with normalized power targets."""

    inputs: np.ndarray  # (n, LOOKBACK) float32
    targets: np.ndarray  # (n,) float32

    def __len__(self):
        return self.inputs.shape[0]


def lookback_rows(indices: np.ndarray) -> np.ndarray:
    """Row t = indices[t-5 .. t-1], left-padded with zeros at the start."""
    n = len(indices)
    padded = np.concatenate([np.zeros(LOOKBACK, dtype=np.int64), np.asarray(indices, dtype=np.int64)])
    return np.lib.stride_tricks.sliding_window_view(padded, LOOKBACK)[:n].copy()


def make_regressor_samples(indices, powers, power_scaler: Scaler,
                           index_scale: float) -> RegressorSamples:
    """Build (previous-5-indices -> current power) pairs over active samples.

    Only timesteps where the appliance is active (index > 0) become
    samples; inputs are divided by index_scale and targets pass through
    the power scaler.
    """
    indices = np.asarray(indices, dtype=np.int64)
    powers = np.asarray(powers, dtype=np.float64)
    if indices.shape != powers.shape:
        raise DataError(f"indices length {indices.size} != powers length {powers.size}")
    if index_scale <= 0:
        raise ValueError("index_scale must be positive")
    active = indices > 0
    rows = lookback_rows(indices)[active]
    inputs = (rows / index_scale).astype(np.float32)
    targets = np.asarray(scale(powers[active], power_scaler, "forward"), dtype=np.float32)
    return RegressorSamples(inputs=inputs, targets=np.atleast_1d(targets))
