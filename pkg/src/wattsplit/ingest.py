"""REDD-style low-frequency dataset ingestion.

On-disk layout: ``house_<k>/labels.dat`` holds one "channel_id label" pair
per line, ``house_<k>/channel_<n>.dat`` holds one "unix_seconds watts" pair
per line. Readings are irregular (~1 s mains, ~3 s appliances); everything
downstream works on series resampled to a fixed period (60 s by default)
with NaN marking empty buckets.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from wattsplit.errors import DataError, ParseError

log = logging.getLogger(__name__)

DEFAULT_PERIOD = 60  # seconds per sample after resampling
DEFAULT_MAX_FILL = 180  # forward-fill gaps up to 3 minutes

# Sub-metered channels sharing a label are summed (e.g. washer_dryer pairs).
# Keys are the canonical appliance names used on the CLI; values are the
# label spellings that occur in the dataset ("dishwaser" is REDD's own typo).
LABEL_ALIASES = {
    "refrigerator": ("refrigerator", "fridge"),
    "microwave": ("microwave",),
    "dishwasher": ("dishwasher", "dishwaser"),
    "washing_machine": ("washing_machine", "washer_dryer", "washing machine"),
    "mains": ("mains",),
}


@dataclass
class PowerSeries:
    """Equally spaced watt readings; NaN marks a missing sample.

    start_time is unix seconds of the first sample, period the spacing in
    seconds. Non-missing values are >= 0.
    """

    start_time: int
    period: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.period <= 0:
            raise ValueError(f"period must be positive, got {self.period}")
        if self.values.size < 1:
            raise ValueError("a PowerSeries needs at least one sample")

    def __len__(self):
        return self.values.size

    @property
    def end_time(self) -> int:
        """Unix second one period past the last sample."""
        return self.start_time + len(self) * self.period

    def timestamps(self) -> np.ndarray:
        return self.start_time + np.arange(len(self), dtype=np.int64) * self.period

    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    def slice(self, start: int, stop: int) -> "PowerSeries":
        """Sub-series covering sample indices [start, stop)."""
        if not 0 <= start < stop <= len(self):
            raise ValueError(f"bad slice [{start}, {stop}) for length {len(self)}")
        return PowerSeries(self.start_time + start * self.period, self.period,
                           self.values[start:stop].copy())


@dataclass(frozen=True)
class ChannelMeta:
    house_id: int
    channel_id: int
    label: str


@dataclass(frozen=True)
class GoodSection:
    """Maximal gap-free run of samples: indices [start_index, start_index+length)."""

    start_index: int
    length: int

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("section length must be >= 1")


def parse_labels(text: str, house_id: int = 0) -> list[ChannelMeta]:
    """Parse a labels.dat index into ChannelMeta rows, order preserved."""
    metas = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"labels line {lineno}: expected 'channel label', got {line!r}")
        try:
            channel_id = int(parts[0])
        except ValueError:
            raise ParseError(f"labels line {lineno}: channel id {parts[0]!r} is not an integer") from None
        if channel_id in seen:
            raise ParseError(f"labels line {lineno}: duplicate channel id {channel_id}")
        seen.add(channel_id)
        metas.append(ChannelMeta(house_id=house_id, channel_id=channel_id, label=parts[1]))
    return metas


def parse_channel(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse a channel_N.dat file into (timestamps, watts) kept verbatim.

    Timestamps must be strictly increasing; resampling happens later.
    """
    times = []
    watts = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"channel line {lineno}: expected 'unix_ts watts', got {line!r}")
        try:
            t = int(parts[0])
            w = float(parts[1])
        except ValueError:
            raise ParseError(f"channel line {lineno}: non-numeric field in {line!r}") from None
        if times and t <= times[-1]:
            raise ParseError(f"channel line {lineno}: timestamp {t} not after {times[-1]}")
        times.append(t)
        watts.append(w)
    return np.asarray(times, dtype=np.int64), np.asarray(watts, dtype=np.float64)


def serialize_channel(times: np.ndarray, watts: np.ndarray) -> str:
    """Inverse of parse_channel; floats keep full round-trip precision."""
    lines = [f"{int(t)} {float(w)!r}" for t, w in zip(times, watts)]
    return "\n".join(lines) + ("\n" if lines else "")


def resample_mean(times: np.ndarray, watts: np.ndarray, period: int = DEFAULT_PERIOD) -> PowerSeries:
    """Downsample irregular readings to the mean per period-aligned bucket.

    Bucket k covers [k*period, (k+1)*period) on the absolute unix-second
    grid, so independently resampled channels align bucket-for-bucket.
    Buckets with no source reading come out NaN.
    """
    if len(times) == 0:
        raise DataError("cannot resample an empty channel")
    if period <= 0:
        raise ValueError(f"period must be positive, got {period}")
    first_bucket = int(times[0]) // period
    last_bucket = int(times[-1]) // period
    n = last_bucket - first_bucket + 1
    idx = times // period - first_bucket
    sums = np.bincount(idx, weights=watts, minlength=n)
    counts = np.bincount(idx, minlength=n)
    values = np.full(n, np.nan)
    have = counts > 0
    values[have] = sums[have] / counts[have]
    return PowerSeries(start_time=first_bucket * period, period=period, values=values)


def fill_gaps(series: PowerSeries, max_fill: int = DEFAULT_MAX_FILL) -> PowerSeries:
    """Forward-fill missing runs no longer than max_fill seconds.

    Longer runs stay missing (good_sections will split there). Leading
    missing samples have no fill source and also stay missing.
    """
    values = series.values.copy()
    missing = np.isnan(values)
    max_run = max_fill // series.period
    run_start = None
    for i in range(len(values) + 1):
        at_end = i == len(values)
        if not at_end and missing[i]:
            if run_start is None:
                run_start = i
            continue
        if run_start is not None:
            run_len = i - run_start
            if run_start > 0 and run_len <= max_run:
                values[run_start:i] = values[run_start - 1]
            run_start = None
    return PowerSeries(series.start_time, series.period, values)


def good_sections(series: PowerSeries, max_gap: int | None = None) -> list[GoodSection]:
    """Maximal runs of valid samples, split where the gap exceeds max_gap.

    The gap between valid neighbours with m missing samples in between is
    (m+1)*period seconds. With max_gap left at the default (one period),
    every missing sample splits; a larger max_gap bridges short missing
    runs, which then count as part of the section (callers forward-fill
    them via fill_gaps before using the values).
    """
    period = series.period
    if max_gap is None:
        max_gap = period
    if max_gap < period:
        raise ValueError(f"max_gap {max_gap} is below the sampling period {period}")
    valid = np.flatnonzero(~series.missing_mask())
    if valid.size == 0:
        return []
    sections = []
    start = valid[0]
    prev = valid[0]
    for i in valid[1:]:
        if (i - prev) * period > max_gap:
            sections.append(GoodSection(int(start), int(prev - start + 1)))
            start = i
        prev = i
    sections.append(GoodSection(int(start), int(prev - start + 1)))
    return sections


def build_aggregate(mains_a: PowerSeries, mains_b: PowerSeries) -> PowerSeries:
    """Sum two mains phases over their timestamp intersection.

    A sample is missing in the output when either side is missing. Both
    series must share the period and sit on the same period grid.
    """
    a, b = align(mains_a, mains_b)
    return PowerSeries(a.start_time, a.period, a.values + b.values)


def align(a: PowerSeries, b: PowerSeries) -> tuple[PowerSeries, PowerSeries]:
    """Crop two series to their common time range."""
    if a.period != b.period:
        raise DataError(f"period mismatch: {a.period} vs {b.period}")
    if (a.start_time - b.start_time) % a.period != 0:
        raise DataError("series are not on the same sampling grid")
    start = max(a.start_time, b.start_time)
    end = min(a.end_time, b.end_time)
    if start >= end:
        raise DataError("series do not overlap in time")
    ia = (start - a.start_time) // a.period
    ib = (start - b.start_time) // b.period
    n = (end - start) // a.period
    return a.slice(ia, ia + n), b.slice(ib, ib + n)


@dataclass
class House:
    """One household: the summed mains signal plus per-appliance series."""

    house_id: int
    period: int
    aggregate: PowerSeries
    appliances: dict[str, PowerSeries] = field(default_factory=dict)
    metas: list[ChannelMeta] = field(default_factory=list)


def _sum_channels(series_list: list[PowerSeries]) -> PowerSeries:
    total = series_list[0]
    for s in series_list[1:]:
        total = build_aggregate(total, s)
    return total


def load_house(data_dir: str | Path, house_id: int, period: int = DEFAULT_PERIOD,
               appliances: list[str] | None = None) -> House:
    """Read one house directory, resample, and sum the mains channels.

    appliances limits which non-mains labels are loaded (canonical names,
    see LABEL_ALIASES); None loads every channel. Channels sharing a label
    are summed.
    """
    house_dir = Path(data_dir) / f"house_{house_id}"
    labels_path = house_dir / "labels.dat"
    if not labels_path.exists():
        raise DataError(f"no labels.dat under {house_dir}")
    metas = parse_labels(labels_path.read_text(), house_id=house_id)

    wanted_labels: set[str] | None = None
    if appliances is not None:
        wanted_labels = set()
        for name in appliances:
            wanted_labels.update(LABEL_ALIASES.get(name, (name,)))

    by_label: dict[str, list[PowerSeries]] = {}
    for meta in metas:
        is_mains = meta.label == "mains"
        if not is_mains and wanted_labels is not None and meta.label not in wanted_labels:
            continue
        path = house_dir / f"channel_{meta.channel_id}.dat"
        if not path.exists():
            raise DataError(f"missing channel file {path}")
        times, watts = parse_channel(path.read_text())
        log.debug("house %d channel %d (%s): %d readings", house_id, meta.channel_id,
                  meta.label, len(times))
        series = resample_mean(times, watts, period)
        by_label.setdefault(meta.label, []).append(series)

    if "mains" not in by_label:
        raise DataError(f"house {house_id} has no mains channel")
    aggregate = _sum_channels(by_label.pop("mains"))

    house = House(house_id=house_id, period=period, aggregate=aggregate, metas=metas)
    for label, series_list in by_label.items():
        canonical = label
        for name, aliases in LABEL_ALIASES.items():
            if label in aliases:
                canonical = name
                break
        merged = _sum_channels(series_list)
        if canonical in house.appliances:
            merged = build_aggregate(house.appliances[canonical], merged)
        house.appliances[canonical] = merged
    return house
