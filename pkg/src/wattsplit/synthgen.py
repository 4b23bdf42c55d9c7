"""Deterministic synthetic-house simulator.

Generates per-appliance ground-truth traces plus the noisy summed mains
signal, so the whole train/disaggregate path can be exercised without the
real dataset. Randomness comes exclusively from numpy's PCG64 generator
seeded per house, which makes traces reproducible across runs and
platforms. Traces can also be written out in the on-disk layout the ingest
module reads, closing the loop end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from wattsplit.ingest import PowerSeries, serialize_channel


@dataclass(frozen=True)
class ApplianceProfile:
    """Duty-cycled load: single-level (optionally decaying), burst, or multi-plateau.

    on_power is the draw at the first active sample; decay_per_step is
    subtracted on each further consecutive sample (compressor-style sag).
    mean_on/mean_off are cycle durations in samples; jitter scales their
    random spread. multi_state plateaus (watts per equal cycle third)
    override on_power when given.
    """

    name: str
    on_power: float
    mean_on: int
    mean_off: int
    decay_per_step: float = 0.0
    kind: str = "periodic"  # periodic | bursty | multi_state
    plateaus: tuple[float, ...] = ()
    duration_jitter: float = 0.2
    power_jitter: float = 0.01

    def __post_init__(self):
        if self.mean_on < 1 or self.mean_off < 1:
            raise ValueError("cycle durations must be >= 1 sample")
        if self.on_power <= 0:
            raise ValueError("on_power must be positive")
        if self.kind not in ("periodic", "bursty", "multi_state"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "multi_state" and not self.plateaus:
            raise ValueError("multi_state profile needs plateaus")


@dataclass
class SimHouse:
    base_load: float = 80.0
    noise_std: float = 5.0
    profiles: list[ApplianceProfile] = field(default_factory=list)
    duration: int = 1440  # samples
    period: int = 60  # seconds
    start_time: int = 1_300_000_000
    seed: int = 0

    def __post_init__(self):
        if self.base_load < 0 or self.noise_std < 0:
            raise ValueError("base_load and noise_std must be >= 0")
        if self.duration < 1:
            raise ValueError("duration must be >= 1 sample")
        # snap to the period grid so resampling a written layout aligns 1:1
        self.start_time -= self.start_time % self.period


FRIDGE = ApplianceProfile("refrigerator", on_power=150.0, mean_on=15, mean_off=30,
                          decay_per_step=2.0)
MICROWAVE = ApplianceProfile("microwave", on_power=1500.0, mean_on=2, mean_off=240,
                             kind="bursty", duration_jitter=0.5)
DISHWASHER = ApplianceProfile("dishwasher", on_power=700.0, mean_on=90, mean_off=720,
                              kind="multi_state", plateaus=(200.0, 700.0, 250.0),
                              duration_jitter=0.1)
DEFAULT_PROFILES = [FRIDGE, MICROWAVE, DISHWASHER]


def _draw_duration(rng, mean: int, jitter: float) -> int:
    spread = max(mean * jitter, 0.0)
    return max(1, int(round(rng.normal(mean, spread))))


def _appliance_trace(profile: ApplianceProfile, duration: int, rng) -> np.ndarray:
    trace = np.zeros(duration)
    t = _draw_duration(rng, profile.mean_off, profile.duration_jitter)  # start mid-off
    while t < duration:
        on_len = _draw_duration(rng, profile.mean_on, profile.duration_jitter)
        end = min(t + on_len, duration)
        steps = np.arange(end - t)
        if profile.kind == "multi_state":
            third = max(on_len // len(profile.plateaus), 1)
            levels = np.asarray(profile.plateaus)[np.minimum(steps // third,
                                                             len(profile.plateaus) - 1)]
        else:
            levels = profile.on_power - profile.decay_per_step * steps
        levels = levels * (1.0 + rng.normal(0.0, profile.power_jitter, size=len(steps)))
        trace[t:end] = np.maximum(levels, 1.0)
        t = end + _draw_duration(rng, profile.mean_off, profile.duration_jitter)
    return trace


def simulate_house(config: SimHouse) -> tuple[PowerSeries, dict[str, PowerSeries]]:
    """Generate (mains, per-appliance truth), deterministic per seed.

    mains = base_load + sum(appliances) + gaussian noise, clamped at 0.
    """
    rng = np.random.default_rng(config.seed)
    truth = {}
    total = np.full(config.duration, config.base_load)
    for profile in config.profiles:
        trace = _appliance_trace(profile, config.duration, rng)
        truth[profile.name] = PowerSeries(config.start_time, config.period, trace)
        # accumulate the stored (float32-rounded) trace so conservation
        # against the emitted truth series holds exactly at noise 0
        total = total + truth[profile.name].values.astype(np.float64)
    if config.noise_std > 0:
        total = total + rng.normal(0.0, config.noise_std, size=config.duration)
    mains = PowerSeries(config.start_time, config.period,
                        np.maximum(total, 0.0))
    return mains, truth


def write_redd_layout(out_dir: str | Path, config: SimHouse, house_id: int = 1,
                      native_period: int | None = None) -> Path:
    """Materialize a simulated house in the labels.dat/channel_N.dat layout.

    The mains signal is split evenly across two mains channels, as in the
    real dataset's split-phase wiring. With native_period below the
    simulation period each sample is repeated at the finer spacing, so
    resampling back to the working period is exercised too.
    """
    mains, truth = simulate_house(config)
    house_dir = Path(out_dir) / f"house_{house_id}"
    house_dir.mkdir(parents=True, exist_ok=True)

    channels: list[tuple[str, PowerSeries, float]] = [
        ("mains", mains, 0.5),
        ("mains", mains, 0.5),
    ]
    channels += [(name, series, 1.0) for name, series in truth.items()]

    labels = []
    for n, (label, series, factor) in enumerate(channels, start=1):
        labels.append(f"{n} {label}")
        times = series.timestamps()
        watts = series.values.astype(np.float64) * factor
        if native_period and native_period < series.period:
            reps = series.period // native_period
            times = (times[:, None] + np.arange(reps) * native_period).ravel()
            watts = np.repeat(watts, reps)
        (house_dir / f"channel_{n}.dat").write_text(serialize_channel(times, np.round(watts, 2)))
    (house_dir / "labels.dat").write_text("\n".join(labels) + "\n")
    return house_dir
