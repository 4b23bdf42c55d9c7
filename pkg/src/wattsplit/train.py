"""Training procedures and evaluation protocols.

Two protocols: same_house trains and tests on a chronological 70:30 split
of one house; cross_house trains on a fixed set of houses and tests on an
unseen one (refrigerator 2,3,5,6 -> 1; microwave 1,2 -> 3; dishwasher
1,2 -> 4). The washing machine only participates in same_house.

Classifier batches are class-balanced by default because active samples
are rare for most appliances (a microwave is on well under 1% of the
time). Everything is seeded; two runs with the same config produce
identical parameters.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from wattsplit.errors import DataError, TrainingError
from wattsplit.features import (
    RegressorSamples,
    Scaler,
    WindowSet,
    fit_scaler,
    make_regressor_samples,
    make_windows,
    run_length_index,
    scale,
)
from wattsplit.ingest import DEFAULT_MAX_FILL, House, PowerSeries, align, fill_gaps, good_sections
from wattsplit.metrics import classification_metrics
from wattsplit.models import ModelBundle, build_classifier, build_regressor
from wattsplit.nn import Adam, Network
from wattsplit.nn.losses import cross_entropy, mse, one_hot
from wattsplit.signature import ApplianceParams, OffStats, continuous_sequences, on_state_labels

log = logging.getLogger(__name__)

CROSS_HOUSE_SPLITS = {
    "refrigerator": ((2, 3, 5, 6), (1,)),
    "microwave": ((1, 2), (3,)),
    "dishwasher": ((1, 2), (4,)),
}


@dataclass(frozen=True)
class SplitPlan:
    mode: str  # same_house | cross_house
    train_houses: tuple[int, ...]
    test_houses: tuple[int, ...]
    train_fraction: float = 0.70


def make_split(appliance: str, mode: str, houses: tuple[int, ...] = (),
               train_fraction: float = 0.70) -> SplitPlan:
    """Resolve the house assignment for one appliance and protocol."""
    if mode == "same_house":
        if not 0 < train_fraction < 1:
            raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
        return SplitPlan("same_house", tuple(houses), tuple(houses), train_fraction)
    if mode == "cross_house":
        if appliance not in CROSS_HOUSE_SPLITS:
            raise DataError(f"no cross-house split defined for {appliance!r}")
        train, test = CROSS_HOUSE_SPLITS[appliance]
        return SplitPlan("cross_house", train, test, train_fraction)
    raise ValueError(f"unknown split mode {mode!r}")


@dataclass
class TrainConfig:
    step_size: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    balance: bool = True
    val_fraction: float = 0.10

    def __post_init__(self):
        if min(self.step_size, self.batch_size, self.max_epochs, self.patience) <= 0:
            raise ValueError("step_size, batch_size, max_epochs, patience must be positive")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must be in (0, 1)")


@dataclass
class TrainReport:
    """Per-epoch losses plus the snapshot the run settled on.

    Serialized without the wall clock so fixed-seed runs write identical
    files.
    """

    rows: list[tuple[int, float, float, float]] = field(default_factory=list)
    best_epoch: int = 0
    wall_clock_s: float = 0.0

    def add(self, epoch, train_loss, val_loss, val_metric):
        for v in (train_loss, val_loss, val_metric):
            if not np.isfinite(v) or v < -1e-9:
                raise TrainingError(f"non-finite or negative loss at epoch {epoch}: {v}")
        self.rows.append((epoch, float(train_loss), float(val_loss), float(val_metric)))

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss,val_metric"]
        lines += [f"{e},{tl:.6f},{vl:.6f},{vm:.6f}" for e, tl, vl, vm in self.rows]
        return "\n".join(lines) + "\n"


def balanced_batches(windows: WindowSet, batch_size: int, rng) -> list[np.ndarray]:
    """Index batches with equal on and off counts.

    The epoch covers every on-labelled window at least once; off windows
    are subsampled (or recycled) to match. Returns the whole epoch's
    batches so callers simply iterate.
    """
    labels = windows.labels
    on_idx = np.flatnonzero(labels == 1)
    off_idx = np.flatnonzero(labels == 0)
    if len(on_idx) == 0 or len(off_idx) == 0:
        raise TrainingError("balanced batching needs both classes present")
    half = max(batch_size // 2, 1)
    on_pool = rng.permutation(on_idx)
    n_batches = int(np.ceil(len(on_pool) / half))

    def off_stream():
        while True:
            yield from rng.permutation(off_idx)

    off_iter = off_stream()
    batches = []
    for k in range(n_batches):
        on_part = on_pool[k * half:(k + 1) * half]
        if len(on_part) < half:  # wrap the shuffled pool to fill the last batch
            on_part = np.concatenate([on_part, on_pool[:half - len(on_part)]])
        off_part = np.fromiter(off_iter, dtype=np.int64, count=half)
        batch = np.concatenate([on_part, off_part])
        batches.append(rng.permutation(batch))
    return batches


def plain_batches(n: int, batch_size: int, rng) -> list[np.ndarray]:
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def _chronological_tail_split(n: int, val_fraction: float) -> int:
    n_val = max(1, int(round(n * val_fraction)))
    if n_val >= n:
        raise TrainingError(f"{n} samples cannot support a validation split")
    return n - n_val


def train_classifier(windows: WindowSet, config: TrainConfig) -> tuple[Network, TrainReport]:
    """Fit the state classifier; early-stops on a validation-F1 plateau.

    Validation is the chronological tail of the window set. The returned
    network carries the best-validation snapshot.
    """
    if windows.labels is None or len(windows) == 0:
        raise TrainingError("classifier training needs labelled windows")
    cut = _chronological_tail_split(len(windows), config.val_fraction)
    x_train, y_train = windows.windows[:cut], windows.labels[:cut]
    x_val, y_val = windows.windows[cut:], windows.labels[cut:]
    classes = np.unique(y_train)
    if len(classes) < 2:
        raise TrainingError(f"training windows contain a single class ({classes.tolist()})")

    net = build_classifier(windows.window_len, seed=config.seed)
    opt = Adam(step_size=config.step_size)
    rng = np.random.default_rng(config.seed)
    train_set = WindowSet(x_train, y_train, windows.window_len)
    report = TrainReport()
    best_f1, best_state, since_best = -1.0, net.state_dict(), 0
    t0 = time.perf_counter()

    for epoch in range(1, config.max_epochs + 1):
        if config.balance:
            batches = balanced_batches(train_set, config.batch_size, rng)
        else:
            batches = plain_batches(len(train_set), config.batch_size, rng)
        losses = []
        for idx in batches:
            probs = net.forward(x_train[idx][:, :, None])
            loss, dy = cross_entropy(probs, one_hot(y_train[idx]))
            losses.append(loss)
            net.backward(dy)
            opt.step(net.parameters(), net.gradients())

        val_probs = net.forward(x_val[:, :, None])
        val_loss, _ = cross_entropy(val_probs, one_hot(y_val))
        val_pred = val_probs.argmax(axis=1)
        if y_val.min() == y_val.max():  # degenerate tail: fall back to accuracy
            val_f1 = float((val_pred == y_val).mean())
        else:
            _, rep = classification_metrics(val_pred, y_val)
            val_f1 = rep.f1
        report.add(epoch, float(np.mean(losses)), val_loss, val_f1)

        if val_f1 > best_f1 + 1e-4:
            best_f1, best_state, since_best = val_f1, net.state_dict(), 0
            report.best_epoch = epoch
        else:
            since_best += 1
            if since_best >= config.patience:
                break

    net.load_state_dict(best_state)
    report.wall_clock_s = time.perf_counter() - t0
    log.info("classifier: best val F1 %.4f at epoch %d (%.1fs)",
             best_f1, report.best_epoch, report.wall_clock_s)
    return net, report


def train_regressor(samples: RegressorSamples, config: TrainConfig) -> tuple[Network, TrainReport]:
    """Fit the power regressor on normalized targets; early-stops on val MSE."""
    if len(samples) == 0:
        raise TrainingError("regressor training needs at least one active sample")
    cut = _chronological_tail_split(len(samples), config.val_fraction)
    x_train, y_train = samples.inputs[:cut], samples.targets[:cut]
    x_val, y_val = samples.inputs[cut:], samples.targets[cut:]

    net = build_regressor(seed=config.seed)
    opt = Adam(step_size=config.step_size)
    rng = np.random.default_rng(config.seed)
    report = TrainReport()
    best_mse, best_state, since_best = np.inf, net.state_dict(), 0
    t0 = time.perf_counter()

    for epoch in range(1, config.max_epochs + 1):
        losses = []
        for idx in plain_batches(len(x_train), config.batch_size, rng):
            pred = net.forward(x_train[idx][:, :, None])
            loss, dy = mse(pred, y_train[idx][:, None])
            losses.append(loss)
            net.backward(dy)
            opt.step(net.parameters(), net.gradients())

        val_pred = net.forward(x_val[:, :, None])
        val_loss, _ = mse(val_pred, y_val[:, None])
        report.add(epoch, float(np.mean(losses)), val_loss, val_loss)

        if val_loss < best_mse - 1e-7:
            best_mse, best_state, since_best = val_loss, net.state_dict(), 0
            report.best_epoch = epoch
        else:
            since_best += 1
            if since_best >= config.patience:
                break

    net.load_state_dict(best_state)
    report.wall_clock_s = time.perf_counter() - t0
    log.info("regressor: best val MSE %.6f at epoch %d (%.1fs)",
             best_mse, report.best_epoch, report.wall_clock_s)
    return net, report


# ---------------------------------------------------------------------------
# Dataset assembly: houses -> aligned gap-free sections -> model-ready samples
# ---------------------------------------------------------------------------

@dataclass
class SectionData:
    """One gap-free stretch of aligned mains/appliance samples."""

    start_time: int
    period: int
    mains: np.ndarray
    appliance: np.ndarray
    states: np.ndarray

    def __len__(self):
        return len(self.mains)

    def mains_series(self) -> PowerSeries:
        return PowerSeries(self.start_time, self.period, self.mains)


def house_sections(house: House, appliance: str, params: ApplianceParams,
                   max_fill: int = DEFAULT_MAX_FILL) -> list[SectionData]:
    """Aligned, gap-filled, gap-free sections for one appliance of one house."""
    if appliance not in house.appliances:
        raise DataError(f"house {house.house_id} has no {appliance!r} channel "
                        f"(has: {sorted(house.appliances)})")
    agg, app = align(house.aggregate, house.appliances[appliance])
    agg, app = fill_gaps(agg, max_fill), fill_gaps(app, max_fill)
    combined = PowerSeries(agg.start_time, agg.period, agg.values + app.values)
    sections = []
    for sec in good_sections(combined):
        app_slice = app.slice(sec.start_index, sec.start_index + sec.length)
        sections.append(SectionData(
            start_time=app_slice.start_time,
            period=app_slice.period,
            mains=agg.values[sec.start_index:sec.start_index + sec.length].copy(),
            appliance=app_slice.values,
            states=on_state_labels(app_slice, params),
        ))
    if not sections:
        raise DataError(f"house {house.house_id}: no gap-free sections for {appliance}")
    return sections


def chronological_split(sections: list[SectionData],
                        fraction: float) -> tuple[list[SectionData], list[SectionData]]:
    """Cut the concatenated sections at `fraction`, splitting the boundary section."""
    total = sum(len(s) for s in sections)
    cut = int(total * fraction)
    if cut < 1 or cut >= total:
        raise DataError(f"cannot split {total} samples at fraction {fraction}")
    train, test = [], []
    seen = 0
    for s in sections:
        if seen + len(s) <= cut:
            train.append(s)
        elif seen >= cut:
            test.append(s)
        else:
            k = cut - seen
            train.append(SectionData(s.start_time, s.period, s.mains[:k],
                                     s.appliance[:k], s.states[:k]))
            test.append(SectionData(s.start_time + k * s.period, s.period, s.mains[k:],
                                    s.appliance[k:], s.states[k:]))
        seen += len(s)
    if not train or not test:
        raise DataError("chronological split left one side empty")
    return train, test


@dataclass
class TrainingData:
    windows: WindowSet
    samples: RegressorSamples
    mains_scaler: Scaler
    power_scaler: Scaler
    index_scale: float
    off_stats: OffStats


def build_training_data(sections: list[SectionData], window_len: int = 20) -> TrainingData:
    """Assemble classifier windows and regressor samples from train sections.

    Scalers are fit here, on training data only. Section lengths are
    adjusted to whole windows (pad/truncate) before windowing; the zero
    padding carries off-state labels.
    """
    mains_scaler = fit_scaler(np.concatenate([s.mains for s in sections]))
    active_powers = np.concatenate([s.appliance[s.states == 1] for s in sections])
    if active_powers.size == 0:
        raise DataError("no active samples in the training sections")
    power_scaler = fit_scaler(active_powers)

    indices = [run_length_index(s.states) for s in sections]
    index_scale = float(max(1, max(ix.max() for ix in indices)))

    all_windows, all_labels = [], []
    for s in sections:
        scaled = np.asarray(scale(s.mains, mains_scaler, "forward"), dtype=np.float32)
        seqs = continuous_sequences(scaled, window_len)
        labs = continuous_sequences(s.states, window_len)
        for seq, lab in zip(seqs, labs):
            ws = make_windows(seq, lab, window_len)
            all_windows.append(ws.windows)
            all_labels.append(ws.labels)
    if not all_windows:
        raise DataError("all sections are too short to window")
    windows = WindowSet(np.concatenate(all_windows), np.concatenate(all_labels), window_len)

    rows, targets = [], []
    for s, ix in zip(sections, indices):
        rs = make_regressor_samples(ix, s.appliance, power_scaler, index_scale)
        if len(rs):
            rows.append(rs.inputs)
            targets.append(rs.targets)
    samples = RegressorSamples(np.concatenate(rows), np.concatenate(targets))

    off_powers = np.concatenate([s.appliance[s.states == 0] for s in sections])
    if off_powers.size == 0:
        raise DataError("no off-state samples to estimate standby power")
    return TrainingData(windows, samples, mains_scaler, power_scaler, index_scale,
                        OffStats(off_mean=float(off_powers.mean())))


def train_appliance(train_sections: list[SectionData], params: ApplianceParams,
                    config: TrainConfig, window_len: int = 20,
                    period: int = 60) -> tuple[ModelBundle, TrainReport, TrainReport]:
    """Train both networks for one appliance and wrap them in a bundle."""
    data = build_training_data(train_sections, window_len)
    log.info("%s: %d windows (%.2f%% on), %d regressor samples, index scale %g",
             params.name, len(data.windows),
             100.0 * float(np.mean(data.windows.labels)), len(data.samples),
             data.index_scale)
    classifier, clf_report = train_classifier(data.windows, config)
    regressor, reg_report = train_regressor(data.samples, config)
    bundle = ModelBundle(
        appliance=params.name,
        classifier=classifier,
        regressor=regressor,
        mains_scaler=data.mains_scaler,
        power_scaler=data.power_scaler,
        index_scale=data.index_scale,
        params=params,
        off_stats=data.off_stats,
        window_len=window_len,
        period=period,
    )
    return bundle, clf_report, reg_report
