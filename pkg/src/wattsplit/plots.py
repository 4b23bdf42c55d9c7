"""Figure rendering for the CLI report paths.

Every figure lands next to its delimited output file: training runs get a
loss-curve panel, disaggregation runs get an aggregate panel stacked over
per-appliance predicted-vs-true overlays. Uses the Agg backend so headless
runs work.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from wattsplit.ingest import PowerSeries  # noqa: E402
from wattsplit.pipeline import DisaggregationResult  # noqa: E402
from wattsplit.train import TrainReport  # noqa: E402


def save_training_figure(report: TrainReport, path: str | Path, title: str = "") -> Path:
    path = Path(path)
    epochs = [r[0] for r in report.rows]
    fig, (ax_loss, ax_metric) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    ax_loss.plot(epochs, [r[1] for r in report.rows], label="train loss")
    ax_loss.plot(epochs, [r[2] for r in report.rows], label="validation loss")
    ax_loss.axvline(report.best_epoch, color="grey", ls=":", lw=1, label="best epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.legend(loc="best", fontsize=8)
    if title:
        ax_loss.set_title(title)
    ax_metric.plot(epochs, [r[3] for r in report.rows], color="tab:green")
    ax_metric.set_ylabel("validation metric")
    ax_metric.set_xlabel("epoch")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_disaggregation_figure(result: DisaggregationResult,
                               truth: dict[str, PowerSeries] | None,
                               path: str | Path) -> Path:
    path = Path(path)
    truth = truth or {}
    names = list(result.power)
    hours = (result.timestamps() - result.start_time) / 3600.0
    fig, axes = plt.subplots(1 + len(names), 1, sharex=True,
                             figsize=(9, 2.2 * (1 + len(names))))
    axes = [axes] if len(names) == 0 else list(axes)
    axes[0].plot(hours, result.mains, lw=0.7, color="black")
    axes[0].set_ylabel("aggregate (W)")
    for ax, name in zip(axes[1:], names):
        if name in truth and len(truth[name]) == len(result):
            ax.plot(hours, truth[name].values, lw=0.8, color="tab:blue", label="actual")
        ax.plot(hours, result.power[name], lw=0.8, color="tab:red", label="predicted")
        ax.set_ylabel(f"{name} (W)")
        ax.legend(loc="upper right", fontsize=8)
    axes[-1].set_xlabel("hours from start")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
