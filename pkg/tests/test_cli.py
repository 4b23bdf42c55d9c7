import numpy as np
import pytest

from wattsplit.cli import EXIT_DATA, EXIT_OK, EXIT_TRAINING, main, parse_args
from wattsplit.config import load_settings
from wattsplit.errors import DataError
from wattsplit.ingest import serialize_channel


class TestParseArgs:
    def test_stats_command(self):
        args = parse_args(["stats", "--data", "redd/", "--house", "1"])
        assert args.verb == "stats" and args.house == 1 and args.data == "redd/"

    def test_train_cross_house(self):
        args = parse_args(["train", "--appliance", "refrigerator", "--mode", "cross-house"])
        assert args.mode == "cross-house"
        from wattsplit.train import make_split

        plan = make_split("refrigerator", args.mode.replace("-", "_"))
        assert plan.train_houses == (2, 3, 5, 6) and plan.test_houses == (1,)

    def test_no_arguments_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            parse_args([])
        assert exc.value.code == 2

    def test_unknown_verb_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            parse_args(["frobnicate"])
        assert exc.value.code == 2

    def test_missing_required_flag(self):
        with pytest.raises(SystemExit) as exc:
            parse_args(["train"])  # --appliance required
        assert exc.value.code == 2


class TestConfig:
    def test_defaults(self):
        settings = load_settings(None)
        assert settings.period == 60 and settings.window_len == 20
        assert settings.params_for("refrigerator").on_threshold == 50.0

    def test_file_overrides(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text(
            "[data]\nperiod = 30\nwindow = 30\n"
            "[train]\nmax_epochs = 3\nseed = 99\n"
            "[appliance.refrigerator]\non_threshold = 65\n"
            "[appliance.kettle]\non_threshold = 1000\nmin_on = 10\n")
        settings = load_settings(cfg)
        assert settings.period == 30 and settings.window_len == 30
        assert settings.train.max_epochs == 3 and settings.train.seed == 99
        assert settings.params_for("refrigerator").on_threshold == 65.0
        assert settings.params_for("refrigerator").min_on == 60.0  # default kept
        assert settings.params_for("kettle").on_threshold == 1000.0

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(DataError, match="does not exist"):
            load_settings(tmp_path / "none.ini")

    def test_bad_value_rejected(self, tmp_path):
        cfg = tmp_path / "bad.ini"
        cfg.write_text("[train]\nmax_epochs = banana\n")
        with pytest.raises(DataError, match="bad value"):
            load_settings(cfg)


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    """Two simulated days, enough for a fast train/eval/disaggregate loop."""
    root = tmp_path_factory.mktemp("data")
    assert main(["simulate", "--out", str(root), "--days", "2", "--seed", "5"]) == EXIT_OK
    return root


@pytest.fixture(scope="module")
def fast_config(tmp_path_factory):
    cfg = tmp_path_factory.mktemp("cfg") / "fast.ini"
    cfg.write_text("[train]\nmax_epochs = 3\npatience = 3\nseed = 1\n")
    return cfg


class TestCliFlow:
    def test_stats(self, tiny_dataset, capsys):
        assert main(["stats", "--data", str(tiny_dataset), "--house", "1"]) == EXIT_OK
        out = capsys.readouterr().out
        lines = out.strip().split("\n")
        assert lines[0].startswith("house,channel,label")
        assert len(lines) == 6  # 2 mains + 3 appliances + header
        fridge_row = next(l for l in lines if ",refrigerator," in l)
        assert fridge_row.split(",")[-1] != ""  # activation count present

    def test_train_eval_disaggregate_export(self, tiny_dataset, fast_config, tmp_path):
        bundle = tmp_path / "fridge.nilm"
        rc = main(["train", "--data", str(tiny_dataset), "--appliance", "refrigerator",
                   "--mode", "same-house", "--house", "1", "--config", str(fast_config),
                   "--out", str(bundle)])
        assert rc == EXIT_OK
        assert bundle.exists()
        assert (tmp_path / "fridge_classifier.csv").exists()
        assert (tmp_path / "fridge_regressor.csv").exists()
        assert (tmp_path / "fridge_classifier.png").stat().st_size > 0

        metrics = tmp_path / "metrics.csv"
        rc = main(["eval", "--data", str(tiny_dataset), "--bundle", str(bundle),
                   "--mode", "same-house", "--house", "1", "--config", str(fast_config),
                   "--out", str(metrics)])
        assert rc == EXIT_OK
        header, row = metrics.read_text().strip().split("\n")
        assert header.startswith("appliance,split,precision")
        assert row.startswith("refrigerator,same_house:1,")

        traces = tmp_path / "traces.csv"
        rc = main(["disaggregate", "--data", str(tiny_dataset), "--house", "1",
                   "--bundle", str(bundle), "--out", str(traces)])
        assert rc == EXIT_OK
        lines = traces.read_text().strip().split("\n")
        assert lines[0] == "timestamp,mains,refrigerator_pred,refrigerator_true"
        assert len(lines) == 2 * 1440 + 1
        assert traces.with_suffix(".png").stat().st_size > 0

        export_dir = tmp_path / "export"
        rc = main(["export-bundle", "--bundle", str(bundle), "--out", str(export_dir)])
        assert rc == EXIT_OK
        manifest = export_dir / "manifest.json"
        assert manifest.exists()
        import json

        tensors = json.loads(manifest.read_text())["tensors"]
        assert "classifier.0.W" in tensors and "regressor.2.b" in tensors
        blob = (export_dir / tensors["classifier.0.W"]["file"]).read_bytes()
        assert len(blob) == 4 * int(np.prod(tensors["classifier.0.W"]["shape"]))

    def test_no_plot_skips_figures(self, tiny_dataset, fast_config, tmp_path):
        bundle = tmp_path / "mw.nilm"
        rc = main(["train", "--data", str(tiny_dataset), "--appliance", "microwave",
                   "--mode", "same-house", "--house", "1", "--config", str(fast_config),
                   "--out", str(bundle), "--no-plot"])
        assert rc == EXIT_OK
        assert not (tmp_path / "mw_classifier.png").exists()

    def test_missing_data_dir_is_data_error(self, tmp_path, monkeypatch):
        monkeypatch.delenv("WATTSPLIT_DATA", raising=False)
        rc = main(["stats", "--data", str(tmp_path / "absent"), "--house", "1"])
        assert rc == EXIT_DATA

    def test_env_var_supplies_data_dir(self, tiny_dataset, monkeypatch, capsys):
        monkeypatch.setenv("WATTSPLIT_DATA", str(tiny_dataset))
        assert main(["stats", "--house", "1"]) == EXIT_OK

    def test_missing_bundle_is_data_error(self, tiny_dataset, tmp_path):
        rc = main(["eval", "--data", str(tiny_dataset), "--bundle",
                   str(tmp_path / "none.nilm"), "--house", "1"])
        assert rc == EXIT_DATA

    def test_cross_house_without_houses_is_data_error(self, tiny_dataset, fast_config):
        # the simulated dataset has house 1 only; the fridge table needs 2,3,5,6
        rc = main(["train", "--data", str(tiny_dataset), "--appliance", "refrigerator",
                   "--mode", "cross-house", "--config", str(fast_config)])
        assert rc == EXIT_DATA

    def test_cross_house_protocol_end_to_end(self, tmp_path, fast_config):
        data = tmp_path / "multi"
        for house_id in (1, 2, 3, 5, 6):
            rc = main(["simulate", "--out", str(data), "--days", "1",
                       "--seed", str(40 + house_id), "--house-id", str(house_id)])
            assert rc == EXIT_OK
        bundle = tmp_path / "fridge_x.nilm"
        rc = main(["train", "--data", str(data), "--appliance", "refrigerator",
                   "--mode", "cross-house", "--config", str(fast_config),
                   "--out", str(bundle), "--no-plot"])
        assert rc == EXIT_OK
        metrics = tmp_path / "xh.csv"
        rc = main(["eval", "--data", str(data), "--bundle", str(bundle),
                   "--mode", "cross-house", "--out", str(metrics)])
        assert rc == EXIT_OK
        row = metrics.read_text().strip().split("\n")[1]
        assert row.startswith("refrigerator,cross_house:1,")

    def test_single_class_training_is_training_error(self, tmp_path, fast_config):
        # appliance active only inside what becomes the validation tail, so
        # the classifier's training windows hold a single class
        n = 1000
        t = np.arange(n, dtype=np.int64) * 60
        appliance = np.zeros(n)
        appliance[660:680] = 140.0 + np.linspace(0, 5, 20)
        mains = 100.0 + 10.0 * (np.arange(n) % 3) + appliance
        house_dir = tmp_path / "house_1"
        house_dir.mkdir(parents=True)
        (house_dir / "labels.dat").write_text("1 mains\n2 mains\n3 refrigerator\n")
        (house_dir / "channel_1.dat").write_text(serialize_channel(t, mains * 0.5))
        (house_dir / "channel_2.dat").write_text(serialize_channel(t, mains * 0.5))
        (house_dir / "channel_3.dat").write_text(serialize_channel(t, appliance))
        rc = main(["train", "--data", str(tmp_path), "--appliance", "refrigerator",
                   "--mode", "same-house", "--house", "1", "--config", str(fast_config),
                   "--out", str(tmp_path / "x.nilm"), "--no-plot"])
        assert rc == EXIT_TRAINING
