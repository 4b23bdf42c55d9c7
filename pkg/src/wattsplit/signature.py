"""Per-appliance consumption signatures: on/off labels, activations, standby stats.

Labels drive both the classifier targets and the activation extraction used
to calibrate against per-house activation counts. Thresholds and minimum
durations are per-appliance knobs (the shipped defaults follow common NILM
toolkit convention and can be overridden from the config file).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wattsplit.errors import DataError
from wattsplit.ingest import PowerSeries


@dataclass(frozen=True)
class ApplianceParams:
    """On-power threshold plus minimum on/off durations in seconds."""

    name: str
    on_threshold: float
    min_on: float = 0.0
    min_off: float = 0.0

    def __post_init__(self):
        if self.on_threshold <= 0:
            raise ValueError("on_threshold must be positive")
        if self.min_on < 0 or self.min_off < 0:
            raise ValueError("min_on/min_off must be >= 0")


DEFAULT_APPLIANCE_PARAMS = {
    "refrigerator": ApplianceParams("refrigerator", on_threshold=50.0, min_on=60.0, min_off=12.0),
    "microwave": ApplianceParams("microwave", on_threshold=200.0, min_on=12.0, min_off=30.0),
    "dishwasher": ApplianceParams("dishwasher", on_threshold=10.0, min_on=1800.0, min_off=1800.0),
    "washing_machine": ApplianceParams("washing_machine", on_threshold=20.0, min_on=1800.0, min_off=160.0),
}


@dataclass(frozen=True)
class Activation:
    """One maximal active run: powers copied verbatim from the source series."""

    start_index: int
    powers: np.ndarray

    def __len__(self):
        return len(self.powers)


@dataclass(frozen=True)
class OffStats:
    off_mean: float


def on_state_labels(series: PowerSeries, params: ApplianceParams) -> np.ndarray:
    """Binary operating-state labels, one per sample.

    A sample starts as 1 when its power exceeds on_threshold (missing
    counts as off). Then, in this order: on-runs shorter than min_on are
    flipped off, and off-runs shorter than min_off that sit between two
    on-runs are bridged on.
    """
    if len(series) == 0:
        raise DataError("cannot label an empty series")
    power = series.values
    states = (np.nan_to_num(power, nan=0.0) > params.on_threshold).astype(np.int8)
    states = _drop_short_runs(states, value=1, min_samples=_to_samples(params.min_on, series.period))
    states = _bridge_short_gaps(states, min_samples=_to_samples(params.min_off, series.period))
    return states


def _to_samples(duration: float, period: int) -> int:
    """Samples needed to span at least `duration` seconds."""
    return int(np.ceil(duration / period))


def _runs(states: np.ndarray, value: int) -> list[tuple[int, int]]:
    """(start, length) of every maximal run of `value`."""
    out = []
    start = None
    for i in range(len(states) + 1):
        cur = states[i] if i < len(states) else None
        if cur == value:
            if start is None:
                start = i
        elif start is not None:
            out.append((start, i - start))
            start = None
    return out


def _drop_short_runs(states: np.ndarray, value: int, min_samples: int) -> np.ndarray:
    out = states.copy()
    for start, length in _runs(states, value):
        if length < min_samples:
            out[start:start + length] = 1 - value
    return out


def _bridge_short_gaps(states: np.ndarray, min_samples: int) -> np.ndarray:
    """Flip interior off-runs shorter than min_samples to on.

    Leading and trailing off-runs are never bridged; only dips between
    two active runs count as switch-off glitches.
    """
    out = states.copy()
    for start, length in _runs(states, value=0):
        interior = start > 0 and start + length < len(states)
        if interior and length < min_samples:
            out[start:start + length] = 1
    return out


def extract_activations(series: PowerSeries, params: ApplianceParams) -> list[Activation]:
    """One Activation per maximal on-run of on_state_labels."""
    states = on_state_labels(series, params)
    return [Activation(start_index=start, powers=series.values[start:start + length].copy())
            for start, length in _runs(states, value=1)]


def continuous_sequences(segment: np.ndarray, window: int) -> list[np.ndarray]:
    """Adjust a gap-free segment to a whole number of windows.

    If the remainder is at least half a window the segment is padded with
    trailing zeros up to the next multiple, otherwise the remainder is
    truncated. Segments shorter than half a window are dropped entirely.
    Returns a list so a dropped segment comes back empty.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    segment = np.asarray(segment)
    n = len(segment)
    remainder = n % window
    if n < window:
        if n >= window / 2:
            out = np.zeros(window, dtype=segment.dtype)
            out[:n] = segment
            return [out]
        return []
    if remainder == 0:
        return [segment.copy()]
    if remainder >= window / 2:
        out = np.zeros(n - remainder + window, dtype=segment.dtype)
        out[:n] = segment
        return [out]
    return [segment[:n - remainder].copy()]


def off_power_mean(series: PowerSeries, params: ApplianceParams) -> OffStats:
    """Mean standby draw over samples labelled off (missing excluded)."""
    states = on_state_labels(series, params)
    off = (states == 0) & ~series.missing_mask()
    if not off.any():
        raise DataError(f"{params.name}: no off-state samples to average")
    return OffStats(off_mean=float(series.values[off].mean()))
