"""Spiking-RNN training on simulated phase-change-memory crossbar arrays."""

from .config import ExperimentConfig, load_config, save_config, config_hash
from .crossbar import Crossbar, PulsePlan, PulseStats
from .devices import DeviceModelParams, DeviceState
from .errors import ConfigError
from .network import NetParams, NetState
from .training import TrialMetrics, train
from .updaters import AccumulatorState, UpdaterConfig

__version__ = "0.1.0"

__all__ = [
    "AccumulatorState",
    "ConfigError",
    "Crossbar",
    "DeviceModelParams",
    "DeviceState",
    "ExperimentConfig",
    "NetParams",
    "NetState",
    "PulsePlan",
    "PulseStats",
    "TrialMetrics",
    "UpdaterConfig",
    "config_hash",
    "load_config",
    "save_config",
    "train",
    "__version__",
]
