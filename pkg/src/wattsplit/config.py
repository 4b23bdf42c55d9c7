"""Flat key=value configuration with per-appliance sections.

INI syntax via configparser, e.g.::

    [data]
    period = 60
    window = 20
    max_fill = 180

    [train]
    step_size = 0.001
    batch_size = 64
    max_epochs = 50
    patience = 5
    seed = 0
    balance = true

    [appliance.refrigerator]
    on_threshold = 50
    min_on = 60
    min_off = 12

Anything not in the file keeps its default; CLI flags override the file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from wattsplit.errors import DataError
from wattsplit.signature import DEFAULT_APPLIANCE_PARAMS, ApplianceParams
from wattsplit.train import TrainConfig


@dataclass
class Settings:
    period: int = 60
    window_len: int = 20
    max_fill: int = 180
    train: TrainConfig = field(default_factory=TrainConfig)
    appliance_params: dict[str, ApplianceParams] = field(
        default_factory=lambda: dict(DEFAULT_APPLIANCE_PARAMS))

    def params_for(self, appliance: str) -> ApplianceParams:
        if appliance not in self.appliance_params:
            raise DataError(f"no appliance parameters for {appliance!r}; add an "
                            f"[appliance.{appliance}] section to the config")
        return self.appliance_params[appliance]


def load_settings(path: str | Path | None = None) -> Settings:
    settings = Settings()
    if path is None:
        return settings
    path = Path(path)
    if not path.exists():
        raise DataError(f"config file {path} does not exist")
    parser = configparser.ConfigParser()
    try:
        parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as e:
        raise DataError(f"bad config file: {e}") from None

    try:
        if parser.has_section("data"):
            sec = parser["data"]
            settings.period = sec.getint("period", settings.period)
            settings.window_len = sec.getint("window", settings.window_len)
            settings.max_fill = sec.getint("max_fill", settings.max_fill)
        if parser.has_section("train"):
            sec = parser["train"]
            settings.train = TrainConfig(
                step_size=sec.getfloat("step_size", settings.train.step_size),
                batch_size=sec.getint("batch_size", settings.train.batch_size),
                max_epochs=sec.getint("max_epochs", settings.train.max_epochs),
                patience=sec.getint("patience", settings.train.patience),
                seed=sec.getint("seed", settings.train.seed),
                balance=sec.getboolean("balance", settings.train.balance),
            )
        for section in parser.sections():
            if not section.startswith("appliance."):
                continue
            name = section.removeprefix("appliance.")
            base = settings.appliance_params.get(
                name, ApplianceParams(name, on_threshold=10.0))
            sec = parser[section]
            settings.appliance_params[name] = replace(
                base,
                on_threshold=sec.getfloat("on_threshold", base.on_threshold),
                min_on=sec.getfloat("min_on", base.min_on),
                min_off=sec.getfloat("min_off", base.min_off),
            )
    except ValueError as e:
        raise DataError(f"bad value in config file {path}: {e}") from None
    return settings
