"""YAML run configuration: defaults, merging, validation and object building."""

from __future__ import annotations

import copy
from datetime import date
from pathlib import Path
from typing import Any

import yaml

from .backtest import BacktestConfig, BarowModel, RollingModel, SequentialArowModel
from .baselines import RollingConfig
from .data import RegimeSpec
from .errors import BarowError
from .model import Hyperparams, RScaling

MODEL_NAMES = ("barow", "arow-seq", "rolling")

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "data": {
        "panel": None,
        "prices": None,
        "neutralize": True,
        "standardize_features": True,
    },
    "synthetic": {
        "K": 100,
        "noise_std": 1.0,
        "feature_dist": "normal",
        "uniform_bounds": [-1.0, 1.0],
        "start": "2010-01-04",
        "segments": [{"days": 252, "w": [1.0]}],
    },
    "macd": {"fast": 12, "slow": 26, "signal": 9},
    "backtest": {
        "burn_in_days": 252,
        "annualization": 252.0,
        "rank_ic": False,
        "models": list(MODEL_NAMES),
    },
    "models": {
        "barow": {
            "r": 1.0,
            "sigma0_scale": 1.0,
            "r_scaling": "per_batch",
            "k_ref": 1,
            "reset_every": None,
        },
        "arow-seq": {"r": 1.0, "sigma0_scale": 1.0, "shuffle": False},
        "rolling": {"window_days": 252, "refit_every": 1, "ridge_eps": 1e-8},
    },
    "tune": {"model": "barow", "grid": [0.1, 1.0, 10.0], "start": None, "end": None},
}


class ConfigError(BarowError):
    """Invalid configuration value; ``field`` is the dotted key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


def _merge(base: dict, override: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        name = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(name, "unknown key")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(name, "expected a mapping")
            out[key] = _merge(base[key], value, f"{name}.")
        else:
            out[key] = value
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the YAML file at ``path``, then ``overrides``."""
    raw: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from None
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"not valid YAML: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config", "top level must be a mapping")
    cfg = _merge(DEFAULTS, raw)
    if overrides:
        cfg = _merge(cfg, overrides)
    validate(cfg)
    return cfg


def _coerce(value):
    # PyYAML reads exponent literals without a dot ("1e-8") as strings
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    return value


def _num(cfg: dict, field: str, *, positive=False, nonneg=False, integer=False):
    node = cfg
    *parents, leaf = field.split(".")
    for p in parents:
        node = node[p]
    value = _coerce(node[leaf])
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(field, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(field, f"must be positive, got {value!r}")
    if nonneg and not value >= 0:
        raise ConfigError(field, f"must be non-negative, got {value!r}")
    node[leaf] = int(value) if integer else float(value)
    return node[leaf]


def _date(value, field: str) -> date | None:
    if value is None or isinstance(value, date):
        return value
    try:
        return date.fromisoformat(str(value))
    except ValueError:
        raise ConfigError(field, f"expected YYYY-MM-DD, got {value!r}") from None


def validate(cfg: dict) -> None:
    _num(cfg, "seed", integer=True)
    for key in ("fast", "slow", "signal"):
        _num(cfg, f"macd.{key}", positive=True, integer=True)
    if cfg["macd"]["fast"] >= cfg["macd"]["slow"]:
        raise ConfigError("macd.fast", "must be smaller than macd.slow")

    syn = cfg["synthetic"]
    _num(cfg, "synthetic.K", positive=True, integer=True)
    _num(cfg, "synthetic.noise_std", nonneg=True)
    if syn["feature_dist"] not in ("normal", "uniform"):
        raise ConfigError("synthetic.feature_dist", "must be 'normal' or 'uniform'")
    _date(syn["start"], "synthetic.start")
    segs = syn["segments"]
    if not isinstance(segs, list) or not segs:
        raise ConfigError("synthetic.segments", "need at least one segment")
    dims = set()
    for i, seg in enumerate(segs):
        name = f"synthetic.segments[{i}]"
        if not isinstance(seg, dict) or set(seg) != {"days", "w"}:
            raise ConfigError(name, "each segment needs exactly 'days' and 'w'")
        if isinstance(seg["days"], bool) or not isinstance(seg["days"], int) or seg["days"] < 1:
            raise ConfigError(f"{name}.days", "must be a positive integer")
        if not isinstance(seg["w"], list) or not seg["w"]:
            raise ConfigError(f"{name}.w", "must be a non-empty list of numbers")
        dims.add(len(seg["w"]))
    if len(dims) > 1:
        raise ConfigError("synthetic.segments", "all weight vectors must have the same length")

    bt = cfg["backtest"]
    _num(cfg, "backtest.burn_in_days", nonneg=True, integer=True)
    _num(cfg, "backtest.annualization", positive=True)
    if not isinstance(bt["models"], list) or not bt["models"]:
        raise ConfigError("backtest.models", "need at least one model")
    for m in bt["models"]:
        if m not in MODEL_NAMES:
            raise ConfigError("backtest.models", f"unknown model {m!r}")

    _num(cfg, "models.barow.r", positive=True)
    _num(cfg, "models.barow.sigma0_scale", positive=True)
    _num(cfg, "models.barow.k_ref", positive=True, integer=True)
    if cfg["models"]["barow"]["r_scaling"] not in [s.value for s in RScaling]:
        raise ConfigError("models.barow.r_scaling", "must be 'per_batch' or 'fixed'")
    if cfg["models"]["barow"]["reset_every"] is not None:
        _num(cfg, "models.barow.reset_every", positive=True, integer=True)
    _num(cfg, "models.arow-seq.r", positive=True)
    _num(cfg, "models.arow-seq.sigma0_scale", positive=True)
    _num(cfg, "models.rolling.window_days", positive=True, integer=True)
    _num(cfg, "models.rolling.refit_every", positive=True, integer=True)
    _num(cfg, "models.rolling.ridge_eps", nonneg=True)

    tune = cfg["tune"]
    if tune["model"] not in ("barow", "arow-seq"):
        raise ConfigError("tune.model", "must be 'barow' or 'arow-seq'")
    if not isinstance(tune["grid"], list) or not tune["grid"]:
        raise ConfigError("tune.grid", "need at least one value")
    tune["grid"] = [_coerce(v) for v in tune["grid"]]
    for v in tune["grid"]:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError("tune.grid", f"values must be positive numbers, got {v!r}")
    _date(tune["start"], "tune.start")
    _date(tune["end"], "tune.end")


def regime_spec(cfg: dict) -> RegimeSpec:
    syn = cfg["synthetic"]
    return RegimeSpec(
        segments=tuple((s["days"], s["w"]) for s in syn["segments"]),
        noise_std=float(syn["noise_std"]),
        K=int(syn["K"]),
        feature_dist=syn["feature_dist"],
        uniform_bounds=tuple(float(v) for v in syn["uniform_bounds"]),
        seed=int(cfg["seed"]),
        start=_date(syn["start"], "synthetic.start"),
    )


def model_spec(cfg: dict, name: str):
    m = cfg["models"][name]
    if name == "barow":
        hp = Hyperparams(
            r=float(m["r"]),
            sigma0_scale=float(m["sigma0_scale"]),
            r_scaling=m["r_scaling"],
            k_ref=int(m["k_ref"]),
        )
        return BarowModel(hp=hp, reset_every=m["reset_every"])
    if name == "arow-seq":
        return SequentialArowModel(
            r=float(m["r"]), sigma0_scale=float(m["sigma0_scale"]), shuffle=bool(m["shuffle"])
        )
    if name == "rolling":
        return RollingModel(RollingConfig(
            window_days=int(m["window_days"]),
            refit_every=int(m["refit_every"]),
            ridge_eps=float(m["ridge_eps"]),
        ))
    raise ConfigError("backtest.models", f"unknown model {name!r}")


def backtest_config(cfg: dict, name: str) -> BacktestConfig:
    bt = cfg["backtest"]
    return BacktestConfig(
        model=model_spec(cfg, name),
        burn_in_days=int(bt["burn_in_days"]),
        annualization=float(bt["annualization"]),
        seed=int(cfg["seed"]),
        rank_ic=bool(bt["rank_ic"]),
    )


def tune_window(cfg: dict) -> tuple[date | None, date | None] | None:
    start = _date(cfg["tune"]["start"], "tune.start")
    end = _date(cfg["tune"]["end"], "tune.end")
    if start is None and end is None:
        return None
    return start, end
