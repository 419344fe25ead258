"""Flat ``key = value`` experiment configuration.

Keys mirror the CLI flags with dashes replaced by underscores. Values are
resolved in the order defaults < config file < command-line flags.
"""

from dataclasses import dataclass
from pathlib import Path

from .. import __version__
from ..errors import InputError
from ..loop import TaskSettings
from ..search import AutoALConfig
from ..strategies import CANDIDATES, StrategyId

DATASETS = ("blobs", "moons", "idx", "csv")
METHODS = ("autoal",) + tuple(s.value for s in StrategyId)


class ConfigError(InputError):
    pass


def _bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text):
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _str_list(text):
    return tuple(v.strip() for v in str(text).split(",") if v.strip())


def _opt_str(text):
    text = str(text).strip()
    return text or None


# key -> (parser, default)
SCHEMA = {
    "dataset": (str, "blobs"),
    "data_path": (_opt_str, None),
    "labels_path": (_opt_str, None),
    "n_points": (int, 2000),
    "classes": (int, 4),
    "dim": (int, 2),
    "class_counts": (_int_list, ()),
    "spread": (float, 1.0),
    "noise": (float, None),
    "clusters_per_class": (int, 4),
    "data_seed": (int, 0),
    "test_fraction": (float, 0.3),
    "method": (str, "autoal"),
    "methods": (_str_list, ("autoal", "random") + tuple(s.value for s in CANDIDATES)),
    "rounds": (int, 8),
    "budget": (int, 50),
    "seed_size": (int, 40),
    "seeds": (_int_list, (0, 1, 2)),
    "stratified": (_bool, False),
    "candidates": (_str_list, tuple(s.value for s in CANDIDATES)),
    "score_mode": (str, "continuous"),
    "gmm_input": (str, "pooled"),
    "lambda": (float, 1.0),
    "lambda_bar": (float, 1.0),
    "warmup_epochs": (int, 200),
    "joint_epochs": (int, 40),
    "batch_size": (int, 10),
    "cycles": (int, 1),
    "lr_search": (float, 0.005),
    "lr_fit": (float, 0.005),
    "loss_pred": (_bool, True),
    "persist_nets": (_bool, False),
    "mc_samples": (int, 10),
    "task_epochs": (int, 100),
    "task_batch_size": (int, 32),
    "task_lr": (float, 0.01),
    "out": (str, "results"),
}

NOISE_DEFAULTS = {"blobs": 0.3, "moons": 0.1}


def parse_config_file(path):
    """Read ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


@dataclass
class ExperimentConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def autoal(self):
        v = self.values
        return AutoALConfig(
            budget=v["budget"], rounds=v["rounds"], cycles=v["cycles"], lam=v["lambda"],
            lam_bar=v["lambda_bar"], warmup_epochs=v["warmup_epochs"],
            joint_epochs=v["joint_epochs"], batch_size=v["batch_size"],
            lr_search=v["lr_search"], lr_fit=v["lr_fit"], score_mode=v["score_mode"],
            gmm_input=v["gmm_input"], loss_pred=v["loss_pred"], candidates=v["candidates"],
            mc_samples=v["mc_samples"], persist_nets=v["persist_nets"],
        )

    def task(self):
        v = self.values
        return TaskSettings(epochs=v["task_epochs"], batch_size=v["task_batch_size"],
                            lr=v["task_lr"], mc_samples=v["mc_samples"])

    def manifest_lines(self):
        lines = [f"version = {__version__}"]
        for key in sorted(self.values):
            value = self.values[key]
            if isinstance(value, tuple):
                value = ",".join(str(x) for x in value)
            lines.append(f"{key} = {'' if value is None else value}")
        return lines


def resolve(file_values=None, overrides=None):
    """Merge defaults, file values and flag overrides, then type-check."""
    raw = {k: default for k, (_, default) in SCHEMA.items()}
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key, text in merged.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        parser = SCHEMA[key][0]
        try:
            raw[key] = parser(text) if isinstance(text, str) else text
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    if raw["noise"] is None:
        raw["noise"] = NOISE_DEFAULTS.get(raw["dataset"], 0.0)
    cfg = ExperimentConfig(raw)
    validate(cfg)
    return cfg


def validate(cfg):
    v = cfg.values
    if v["dataset"] not in DATASETS:
        raise ConfigError(f"unknown dataset {v['dataset']!r}; valid datasets: {', '.join(DATASETS)}")
    for m in (v["method"],) + tuple(v["methods"]):
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; valid methods: {', '.join(METHODS)}")
    if not v["methods"]:
        raise ConfigError("methods list is empty")
    for c in v["candidates"]:
        if c not in {s.value for s in CANDIDATES}:
            valid = ", ".join(s.value for s in CANDIDATES)
            raise ConfigError(f"unknown candidate strategy {c!r}; valid candidates: {valid}")
    if not v["seeds"]:
        raise ConfigError("seeds must be non-empty")
    if v["dataset"] in ("idx", "csv"):
        paths = [v["data_path"]] + ([v["labels_path"]] if v["dataset"] == "idx" else [])
        for p in paths:
            if not p or not Path(p).is_file():
                raise ConfigError(f"data file not found: {p}")
    if not 0 < v["test_fraction"] < 1:
        raise ConfigError("test_fraction must lie in (0, 1)")
    if v["rounds"] < 0 or v["budget"] < 1 or v["seed_size"] < 1:
        raise ConfigError("rounds >= 0, budget >= 1 and seed_size >= 1 required")
    try:
        cfg.autoal().validate()
    except InputError as exc:
        raise ConfigError(str(exc)) from None
    return cfg
