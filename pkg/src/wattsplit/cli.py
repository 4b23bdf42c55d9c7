"""Command-line entry point.

Verbs: stats, simulate, train, eval, disaggregate, export-bundle. Exit
codes are a stable scripting contract: 0 success, 2 usage error, 3 data
error, 4 training error. The default dataset directory comes from
WATTSPLIT_DATA when --data is omitted. train and disaggregate render a
matplotlib figure next to each CSV they write (disable with --no-plot).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from wattsplit import __version__
from wattsplit.config import Settings, load_settings
from wattsplit.errors import DataError, TrainingError
from wattsplit.ingest import (
    LABEL_ALIASES,
    PowerSeries,
    align,
    fill_gaps,
    good_sections,
    load_house,
    parse_channel,
    parse_labels,
    resample_mean,
)
from wattsplit.metrics import METRICS_CSV_HEADER, metrics_csv_row
from wattsplit.pipeline import disaggregate_all, evaluate_bundle, export_csv, load_bundle, save_bundle
from wattsplit.signature import extract_activations
from wattsplit.synthgen import DEFAULT_PROFILES, SimHouse, write_redd_layout
from wattsplit.train import chronological_split, house_sections, make_split, train_appliance

log = logging.getLogger("wattsplit")

DATA_ENV = "WATTSPLIT_DATA"
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_TRAINING = 4

APPLIANCE_ALIASES = {"fridge": "refrigerator", "washer-dryer": "washing_machine"}


def _canonical_appliance(name: str) -> str:
    name = name.strip().lower().replace("-", "_")
    return APPLIANCE_ALIASES.get(name, name)


def _mode(name: str) -> str:
    return name.replace("-", "_")


def _data_dir(args) -> Path:
    data = args.data or os.environ.get(DATA_ENV)
    if not data:
        raise DataError(f"no dataset directory: pass --data or set {DATA_ENV}")
    path = Path(data)
    if not path.is_dir():
        raise DataError(f"dataset directory {path} does not exist")
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wattsplit",
        description="Train per-appliance models and disaggregate household mains power.",
    )
    parser.add_argument("--version", action="version", version=f"wattsplit {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_common(p, data=True):
        if data:
            p.add_argument("--data", help=f"dataset directory (default: ${DATA_ENV})")
        p.add_argument("--config", help="INI config file overriding defaults")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("stats", help="per-channel sample and activation statistics")
    add_common(p)
    p.add_argument("--house", type=int, required=True)
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("simulate", help="write a synthetic house in dataset layout")
    add_common(p, data=False)
    p.add_argument("--out", required=True, help="dataset directory to create")
    p.add_argument("--days", type=float, default=16.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--house-id", type=int, default=1)
    p.add_argument("--base-load", type=float, default=80.0)
    p.add_argument("--noise", type=float, default=5.0)
    p.add_argument("--native-period", type=int, default=60,
                   help="emit readings at this spacing (seconds)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train one appliance's classifier + regressor")
    add_common(p)
    p.add_argument("--appliance", required=True)
    p.add_argument("--mode", choices=["same-house", "cross-house"], default="same-house")
    p.add_argument("--house", type=int, help="house id (same-house mode)")
    p.add_argument("--out", help="bundle path (default <appliance>_<mode>.nilm)")
    p.add_argument("--report", help="report CSV stem (default next to the bundle)")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a bundle on its test split")
    add_common(p)
    p.add_argument("--bundle", required=True)
    p.add_argument("--mode", choices=["same-house", "cross-house"], default="same-house")
    p.add_argument("--house", type=int, help="house id (same-house mode)")
    p.add_argument("--out", help="write metrics CSV here instead of stdout")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("disaggregate", help="run the full pipeline over a house")
    add_common(p)
    p.add_argument("--house", type=int, required=True)
    p.add_argument("--bundle", action="append", required=True,
                   help="bundle path; repeat for several appliances")
    p.add_argument("--out", default="disaggregation.csv")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_disaggregate)

    p = sub.add_parser("export-bundle", help="dump bundle weights for embedded use")
    add_common(p, data=False)
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_export_bundle)

    return parser


def parse_args(argv=None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def _settings(args) -> Settings:
    return load_settings(getattr(args, "config", None))


def _write_or_print(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def cmd_stats(args) -> int:
    settings = _settings(args)
    data_dir = _data_dir(args)
    house_dir = data_dir / f"house_{args.house}"
    labels_path = house_dir / "labels.dat"
    if not labels_path.exists():
        raise DataError(f"no labels.dat under {house_dir}")

    lines = ["house,channel,label,readings,samples,valid,sections,activations"]
    for meta in parse_labels(labels_path.read_text(), house_id=args.house):
        times, watts = parse_channel((house_dir / f"channel_{meta.channel_id}.dat").read_text())
        series = resample_mean(times, watts, settings.period)
        filled = fill_gaps(series, settings.max_fill)
        sections = good_sections(filled)
        valid = int(np.sum(~filled.missing_mask()))
        activations = ""
        for name, params in settings.appliance_params.items():
            if meta.label in LABEL_ALIASES.get(name, (name,)):
                activations = str(len(extract_activations(filled, params)))
                break
        lines.append(f"{args.house},{meta.channel_id},{meta.label},{len(times)},"
                     f"{len(series)},{valid},{len(sections)},{activations}")
    _write_or_print("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = SimHouse(
        base_load=args.base_load,
        noise_std=args.noise,
        profiles=list(DEFAULT_PROFILES),
        duration=int(args.days * 1440),
        seed=args.seed,
    )
    house_dir = write_redd_layout(args.out, config, house_id=args.house_id,
                                  native_period=args.native_period)
    print(house_dir)
    return EXIT_OK


def _train_sections(args, settings, appliance, plan):
    data_dir = _data_dir(args)
    params = settings.params_for(appliance)
    if plan.mode == "same_house":
        if args.house is None:
            raise DataError("--house is required in same-house mode")
        house = load_house(data_dir, args.house, settings.period, [appliance])
        sections = house_sections(house, appliance, params, settings.max_fill)
        train_secs, test_secs = chronological_split(sections, plan.train_fraction)
        return params, train_secs, test_secs
    train_secs, test_secs = [], []
    for hid in plan.train_houses:
        house = load_house(data_dir, hid, settings.period, [appliance])
        train_secs += house_sections(house, appliance, params, settings.max_fill)
    for hid in plan.test_houses:
        house = load_house(data_dir, hid, settings.period, [appliance])
        test_secs += house_sections(house, appliance, params, settings.max_fill)
    return params, train_secs, test_secs


def cmd_train(args) -> int:
    settings = _settings(args)
    appliance = _canonical_appliance(args.appliance)
    mode = _mode(args.mode)
    plan = make_split(appliance, mode, houses=(args.house,) if args.house else ())
    params, train_secs, _ = _train_sections(args, settings, appliance, plan)

    train_cfg = settings.train
    if args.seed is not None:
        train_cfg.seed = args.seed
    if args.epochs is not None:
        train_cfg.max_epochs = args.epochs
    if args.batch_size is not None:
        train_cfg.batch_size = args.batch_size

    bundle, clf_report, reg_report = train_appliance(
        train_secs, params, train_cfg, settings.window_len, settings.period)

    out = Path(args.out or f"{appliance}_{mode}.nilm")
    n_bytes = save_bundle(bundle, out)
    print(f"{out}: {bundle.total_params()} parameters, {n_bytes} bytes")

    report_stem = Path(args.report) if args.report else out.with_suffix("")
    for label, report in (("classifier", clf_report), ("regressor", reg_report)):
        csv_path = report_stem.parent / f"{report_stem.name}_{label}.csv"
        csv_path.write_text(report.to_csv())
        print(f"{csv_path}: best epoch {report.best_epoch}")
        if not args.no_plot:
            from wattsplit.plots import save_training_figure

            fig_path = csv_path.with_suffix(".png")
            save_training_figure(report, fig_path, title=f"{appliance} {label}")
            print(fig_path)
    return EXIT_OK


def cmd_eval(args) -> int:
    settings = _settings(args)
    bundle = load_bundle(args.bundle)
    mode = _mode(args.mode)
    plan = make_split(bundle.appliance, mode, houses=(args.house,) if args.house else ())
    _, _, test_secs = _train_sections(args, settings, bundle.appliance, plan)
    counts, cls, reg = evaluate_bundle(bundle, test_secs)
    label = f"{mode}:" + ",".join(str(h) for h in plan.test_houses)
    text = METRICS_CSV_HEADER + "\n" + metrics_csv_row(bundle.appliance, label, cls, reg) + "\n"
    _write_or_print(text, args.out)
    log.info("confusion: tp=%d fp=%d fn=%d tn=%d", counts.tp, counts.fp, counts.fn, counts.tn)
    return EXIT_OK


def cmd_disaggregate(args) -> int:
    settings = _settings(args)
    data_dir = _data_dir(args)
    bundles = [load_bundle(p) for p in args.bundle]
    wanted = [b.appliance for b in bundles]
    house = load_house(data_dir, args.house, settings.period, wanted)

    aggregate = fill_gaps(house.aggregate, settings.max_fill)
    # project each truth channel onto the aggregate's index space (NaN where
    # the channel has no coverage) so every section exports the same columns
    truth_grid: dict[str, np.ndarray] = {}
    for name in wanted:
        if name not in house.appliances:
            continue
        series = house.appliances[name]
        grid = np.full(len(aggregate), np.nan, dtype=np.float32)
        try:
            agg_crop, app_crop = align(aggregate, series)
        except DataError:
            continue
        offset = (agg_crop.start_time - aggregate.start_time) // aggregate.period
        grid[offset:offset + len(app_crop)] = app_crop.values
        truth_grid[name] = grid
    sections = good_sections(aggregate)
    if not sections:
        raise DataError("the aggregate signal has no gap-free sections")

    chunks = []
    figure_payload = None
    for k, sec in enumerate(sections):
        lo, hi = sec.start_index, sec.start_index + sec.length
        mains = aggregate.slice(lo, hi)
        result = disaggregate_all(mains, bundles)
        truth = {name: PowerSeries(mains.start_time, mains.period, grid[lo:hi])
                 for name, grid in truth_grid.items()}
        text = export_csv(result, truth)
        chunks.append(text if k == 0 else text.split("\n", 1)[1])
        if figure_payload is None or len(result) > len(figure_payload[0]):
            figure_payload = (result, truth)

    out = Path(args.out)
    out.write_text("".join(chunks))
    print(out)
    if not args.no_plot and figure_payload:
        from wattsplit.plots import save_disaggregation_figure

        fig_path = out.with_suffix(".png")
        save_disaggregation_figure(figure_payload[0], figure_payload[1], fig_path)
        print(fig_path)
    return EXIT_OK


def cmd_export_bundle(args) -> int:
    bundle = load_bundle(args.bundle)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "appliance": bundle.appliance,
        "period": bundle.period,
        "window_len": bundle.window_len,
        "mains_scaler": [bundle.mains_scaler.x_min, bundle.mains_scaler.x_max],
        "power_scaler": [bundle.power_scaler.x_min, bundle.power_scaler.x_max],
        "index_scale": bundle.index_scale,
        "on_threshold": bundle.params.on_threshold,
        "off_mean": bundle.off_stats.off_mean,
        "tensors": {},
    }
    for prefix, net in (("classifier", bundle.classifier), ("regressor", bundle.regressor)):
        if net is None:
            continue
        for name, arr in net.parameters():
            fname = f"{prefix}.{name}.bin".replace("/", "_")
            (out_dir / fname).write_bytes(np.ascontiguousarray(arr, dtype="<f4").tobytes())
            manifest["tensors"][f"{prefix}.{name}"] = {
                "file": fname,
                "shape": list(arr.shape),
                "dtype": "float32_le",
            }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(out_dir / "manifest.json")
    return EXIT_OK


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except DataError as e:
        log.error("%s", e)
        return EXIT_DATA
    except TrainingError as e:
        log.error("training failed: %s", e)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
