"""Experiment configuration: nested dataclasses mirrored 1:1 by the YAML files.

Unknown keys anywhere in a config file are an error, so typos fail loudly.
``config_hash`` gives a short stable digest of the fully-resolved config for
leaderboards.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import yaml

from .devices import DeviceModelParams, PERF, REALISTIC
from .errors import ConfigError
from .network import NetParams
from .updaters import UpdaterConfig

MODES = (REALISTIC, PERF, "fp32")
TILES = ("exact", "square")
FEEDBACK_MODES = ("symmetric", "random")


@dataclass
class CrossbarConfig:
    n: int = 1
    beta: float | None = None      # None -> 1 / (n * (g_max - g_min))
    tile: str = "exact"            # "square" pads every layer grid to n_rec x n_rec

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("crossbar n must be >= 1")
        if self.beta is not None and self.beta <= 0:
            raise ConfigError("beta must be positive")
        if self.tile not in TILES:
            raise ConfigError(f"unknown tile policy {self.tile!r}")


@dataclass
class InitConfig:
    """Std of the zero-mean Gaussian initial weights, per layer."""

    w_in_std: float = 0.1
    w_rec_std: float = 0.03
    w_out_std: float = 0.05

    def __post_init__(self):
        if min(self.w_in_std, self.w_rec_std, self.w_out_std) < 0:
            raise ConfigError("init stds must be non-negative")


@dataclass
class ExperimentConfig:
    seed: int = 0
    mode: str = REALISTIC          # realistic | perf | fp32
    epochs: int = 250
    eval_window: int = 10
    pattern_seed: int | None = None  # None -> seed
    input_rate_hz: float = 50.0
    t_steps: int = 1000            # trial length in timesteps
    feedback: str = "symmetric"    # learning-signal feedback matrix
    out: str | None = None
    device: DeviceModelParams = field(default_factory=DeviceModelParams)
    crossbar: CrossbarConfig = field(default_factory=CrossbarConfig)
    net: NetParams = field(default_factory=NetParams)
    init: InitConfig = field(default_factory=InitConfig)
    updater: UpdaterConfig = field(default_factory=UpdaterConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not 1 <= self.eval_window <= self.epochs:
            raise ConfigError("eval_window must lie in [1, epochs]")
        if self.t_steps < 1:
            raise ConfigError("t_steps must be >= 1")
        if self.feedback not in FEEDBACK_MODES:
            raise ConfigError(f"unknown feedback mode {self.feedback!r}")
        if self.input_rate_hz * self.net.dt > 1.0:
            raise ConfigError("input_rate_hz * dt must not exceed 1")
        # the experiment mode governs the device model mode
        if self.mode in (REALISTIC, PERF):
            self.device.mode = self.mode
            self.device.validate()
        if self.updater.n != self.crossbar.n:
            raise ConfigError(
                f"updater.n={self.updater.n} must match crossbar.n={self.crossbar.n}")

    @property
    def resolved_pattern_seed(self) -> int:
        return self.seed if self.pattern_seed is None else self.pattern_seed


_TUPLE_FIELDS = {"write_mu_coeffs", "write_sigma_coeffs"}


def _from_dict(cls, data, path=""):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or cls.__name__}: expected a mapping, got {type(data).__name__}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigError(f"{path or cls.__name__}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        sub = f"{path}.{key}" if path else key
        if key in _DATACLASS_TYPES:
            kwargs[key] = _from_dict(_DATACLASS_TYPES[key], value, sub)
        elif key in _TUPLE_FIELDS:
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


_DATACLASS_TYPES = {
    "device": DeviceModelParams,
    "crossbar": CrossbarConfig,
    "net": NetParams,
    "init": InitConfig,
    "updater": UpdaterConfig,
}


def config_from_dict(data: dict) -> ExperimentConfig:
    return _from_dict(ExperimentConfig, data)


def config_to_dict(cfg) -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            out[f.name] = config_to_dict(value)
        elif isinstance(value, tuple):
            out[f.name] = list(value)
        elif isinstance(value, (np.floating, np.integer)):
            out[f.name] = value.item()
        else:
            out[f.name] = value
    return out


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        data = yaml.safe_load(f)
    if data is None:
        data = {}
    return config_from_dict(data)


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(cfg), f, sort_keys=False)


def config_hash(cfg: ExperimentConfig) -> str:
    """Short digest of the fully-resolved configuration."""
    blob = json.dumps(config_to_dict(cfg), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]
