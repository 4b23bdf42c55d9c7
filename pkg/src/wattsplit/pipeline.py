"""End-to-end inference and model persistence.

Inference chain per appliance: scale mains -> sliding windows -> classifier
-> argmax state -> run-length index -> regressor on the previous five
indices -> inverse-scale to watts (off samples emit the standby mean).

Bundles serialize to a little-endian binary format so a file written on
any platform loads bit-identically on any other:

    magic "NILM" | version u16 | appliance (u16 len + utf-8) | period u32
    | window_len u16 | mains scaler 2xf32 | power scaler 2xf32
    | index_scale f32 | on_threshold f32 | min_on f32 | min_off f32
    | off_mean f32 | n_records u16
    | records: name (u16 len + utf-8), rank u8, dims u32 each,
      float32 weights row-major

Record names are "classifier.<i>.<param>" / "regressor.<i>.<param>" and
must fit the two shipped architectures for the stored window length.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from wattsplit.errors import DataError
from wattsplit.features import lookback_rows, make_windows, run_length_index, scale, Scaler
from wattsplit.ingest import PowerSeries
from wattsplit.metrics import (
    ClassificationReport,
    ConfusionCounts,
    RegressionReport,
    classification_metrics,
    regression_metrics,
)
from wattsplit.models import ModelBundle, build_classifier, build_regressor
from wattsplit.signature import ApplianceParams, OffStats

BUNDLE_MAGIC = b"NILM"
BUNDLE_VERSION = 1
MAX_BUNDLE_BYTES = 300 * 1024
INFERENCE_CHUNK = 8192  # windows per classifier forward pass


class BundleError(DataError):
    """Base for everything wrong with a bundle file."""


class BadMagicError(BundleError):
    pass


class UnsupportedVersionError(BundleError):
    pass


class TruncatedBundleError(BundleError):
    """The file ended before the declared content did."""


@dataclass
class DisaggregationResult:
    """Per-appliance predicted states and watt series on a shared timeline."""

    start_time: int
    period: int
    mains: np.ndarray
    states: dict[str, np.ndarray] = field(default_factory=dict)
    power: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self):
        return len(self.mains)

    def timestamps(self) -> np.ndarray:
        return self.start_time + np.arange(len(self), dtype=np.int64) * self.period


def disaggregate(mains: PowerSeries, bundle: ModelBundle) -> DisaggregationResult:
    """Run the full two-stage chain for one appliance over a mains series."""
    if mains.period != bundle.period:
        raise DataError(f"mains period {mains.period}s does not match the bundle's "
                        f"training period {bundle.period}s")
    if not np.all(np.isfinite(mains.values)):
        raise DataError("mains contains missing or non-finite samples; "
                        "fill gaps or disaggregate per good section")
    if bundle.classifier is None or bundle.regressor is None:
        raise BundleError(f"bundle {bundle.appliance!r} has no trained networks")

    # forward passes cache layer state, so run private copies; the bundle
    # itself stays read-only and concurrent calls over it are safe
    classifier = bundle.classifier.astype(np.float32)
    regressor = bundle.regressor.astype(np.float32)

    scaled = np.asarray(scale(mains.values, bundle.mains_scaler, "forward"), dtype=np.float32)
    windows = make_windows(scaled, None, bundle.window_len).windows[:, :, None]
    states = np.empty(len(mains), dtype=np.int8)
    for lo in range(0, len(windows), INFERENCE_CHUNK):
        probs = classifier.forward(windows[lo:lo + INFERENCE_CHUNK])
        states[lo:lo + INFERENCE_CHUNK] = probs.argmax(axis=1)

    indices = run_length_index(states)
    power = np.full(len(mains), bundle.off_stats.off_mean, dtype=np.float32)
    active = states == 1
    if active.any():
        rows = lookback_rows(indices)[active]
        preds = regressor.forward(bundle.regressor_input(rows))[:, 0]
        watts = scale(preds.astype(np.float64), bundle.power_scaler, "inverse")
        power[active] = np.maximum(watts, 0.0)
    power = np.maximum(power, 0.0)

    return DisaggregationResult(
        start_time=mains.start_time,
        period=mains.period,
        mains=mains.values.copy(),
        states={bundle.appliance: states},
        power={bundle.appliance: power},
    )


def disaggregate_all(mains: PowerSeries, bundles: list[ModelBundle]) -> DisaggregationResult:
    """Merge the per-appliance chains onto one shared timeline."""
    if not bundles:
        raise ValueError("need at least one bundle")
    merged = disaggregate(mains, bundles[0])
    for bundle in bundles[1:]:
        one = disaggregate(mains, bundle)
        merged.states.update(one.states)
        merged.power.update(one.power)
    return merged


def export_csv(result: DisaggregationResult,
               truth: dict[str, PowerSeries] | None = None) -> str:
    """Plot-ready delimited trace: timestamp, mains, per-appliance pred[, true]."""
    truth = truth or {}
    columns = ["timestamp", "mains"]
    series = [result.timestamps(), result.mains]
    for name in result.power:
        columns.append(f"{name}_pred")
        series.append(result.power[name])
        if name in truth:
            t = truth[name]
            if (t.start_time != result.start_time or t.period != result.period
                    or len(t) != len(result)):
                raise DataError(f"truth for {name!r} is not aligned with the result "
                                f"(start {t.start_time} vs {result.start_time}, "
                                f"period {t.period} vs {result.period}, "
                                f"length {len(t)} vs {len(result)})")
            columns.append(f"{name}_true")
            series.append(t.values)
    lines = [",".join(columns)]
    for i in range(len(result)):
        row = [str(int(series[0][i]))]
        row += [f"{float(col[i]):.1f}" for col in series[1:]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def evaluate_bundle(bundle: ModelBundle, sections) -> tuple[ConfusionCounts,
                                                            ClassificationReport,
                                                            RegressionReport]:
    """Score the inference chain against sub-metered truth sections."""
    pred_states, true_states, pred_power, true_power = [], [], [], []
    for sec in sections:
        result = disaggregate(sec.mains_series(), bundle)
        pred_states.append(result.states[bundle.appliance])
        true_states.append(sec.states)
        pred_power.append(result.power[bundle.appliance])
        true_power.append(sec.appliance)
    counts, cls = classification_metrics(np.concatenate(pred_states),
                                         np.concatenate(true_states))
    reg = regression_metrics(np.concatenate(pred_power), np.concatenate(true_power))
    return counts, cls, reg


# ---------------------------------------------------------------------------
# Bundle serialization
# ---------------------------------------------------------------------------

def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError("string too long for bundle format")
    return struct.pack("<H", len(raw)) + raw


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedBundleError(
                f"unexpected end of bundle at byte {self.pos} (needed {n} more)")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def read_str(self) -> str:
        (n,) = self.unpack("<H")
        return self.take(n).decode("utf-8")

    def done(self) -> bool:
        return self.pos == len(self.data)


def encode_bundle(bundle: ModelBundle) -> bytes:
    records = []
    for prefix, net in (("classifier", bundle.classifier), ("regressor", bundle.regressor)):
        if net is None:
            continue
        records += [(f"{prefix}.{name}", arr) for name, arr in net.parameters()]

    parts = [BUNDLE_MAGIC, struct.pack("<H", BUNDLE_VERSION), _pack_str(bundle.appliance)]
    parts.append(struct.pack("<IH", bundle.period, bundle.window_len))
    parts.append(struct.pack(
        "<9f",
        bundle.mains_scaler.x_min, bundle.mains_scaler.x_max,
        bundle.power_scaler.x_min, bundle.power_scaler.x_max,
        bundle.index_scale,
        bundle.params.on_threshold, bundle.params.min_on, bundle.params.min_off,
        bundle.off_stats.off_mean,
    ))
    parts.append(struct.pack("<H", len(records)))
    for name, arr in records:
        parts.append(_pack_str(name))
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    blob = b"".join(parts)
    if len(blob) > MAX_BUNDLE_BYTES:
        raise BundleError(f"bundle is {len(blob)} bytes, over the "
                          f"{MAX_BUNDLE_BYTES}-byte limit")
    return blob


def decode_bundle(data: bytes) -> ModelBundle:
    r = _Reader(data)
    if r.take(4) != BUNDLE_MAGIC:
        raise BadMagicError("not a model bundle (bad magic)")
    (version,) = r.unpack("<H")
    if version != BUNDLE_VERSION:
        raise UnsupportedVersionError(f"bundle version {version} is not supported "
                                      f"(expected {BUNDLE_VERSION})")
    appliance = r.read_str()
    period, window_len = r.unpack("<IH")
    (mains_min, mains_max, power_min, power_max, index_scale,
     on_threshold, min_on, min_off, off_mean) = r.unpack("<9f")
    (n_records,) = r.unpack("<H")

    weights: dict[str, dict[str, np.ndarray]] = {"classifier": {}, "regressor": {}}
    for _ in range(n_records):
        name = r.read_str()
        (rank,) = r.unpack("<B")
        dims = r.unpack(f"<{rank}I")
        count = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(r.take(4 * count), dtype="<f4").reshape(dims).astype(np.float32)
        prefix, _, pname = name.partition(".")
        if prefix not in weights:
            raise BundleError(f"unknown record {name!r}")
        weights[prefix][pname] = arr
    if not r.done():
        raise BundleError(f"{len(r.data) - r.pos} trailing bytes after bundle content")

    def restore(prefix: str, builder):
        if not weights[prefix]:
            return None
        net = builder()
        try:
            net.load_state_dict(weights[prefix])
        except ValueError as e:
            raise BundleError(f"{prefix} weights do not fit the architecture: {e}") from None
        return net

    return ModelBundle(
        appliance=appliance,
        classifier=restore("classifier", lambda: build_classifier(window_len, seed=0)),
        regressor=restore("regressor", lambda: build_regressor(seed=0)),
        mains_scaler=Scaler(mains_min, mains_max),
        power_scaler=Scaler(power_min, power_max),
        index_scale=index_scale,
        params=ApplianceParams(appliance, on_threshold, min_on, min_off),
        off_stats=OffStats(off_mean),
        window_len=window_len,
        period=period,
    )


def save_bundle(bundle: ModelBundle, destination: str | Path) -> int:
    """Write the bundle; returns the byte count."""
    blob = encode_bundle(bundle)
    try:
        Path(destination).write_bytes(blob)
    except OSError as e:
        raise DataError(f"cannot write bundle to {destination}: {e}") from e
    return len(blob)


def load_bundle(source: str | Path) -> ModelBundle:
    path = Path(source)
    if not path.exists():
        raise DataError(f"no bundle at {path}")
    return decode_bundle(path.read_bytes())
