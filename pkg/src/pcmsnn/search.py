"""Seeded random hyperparameter search over declared config ranges.

A sweep file holds a full base experiment config, a ``space`` mapping of
dotted field paths to sampling specs, and a trial budget:

    budget: 60
    base: { ...ExperimentConfig... }
    space:
      updater.eta:    {low: 1.0e-4, high: 1.0e-1, log: true}
      net.v_th:       {low: 0.4, high: 1.0}
      input_rate_hz:  {choices: [30, 50, 70]}

Trials are independent and may run in worker processes; the leaderboard is
identical either way.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import yaml

from .config import (ExperimentConfig, config_from_dict, config_hash,
                     config_to_dict, save_config)
from .errors import ConfigError
from .training import train


@dataclass
class SweepConfig:
    budget: int
    base: ExperimentConfig
    space: dict

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if not self.space:
            raise ConfigError("sweep space must declare at least one dimension")


class SweepResult(NamedTuple):
    rank: int
    score: float
    config_hash: str
    seed: int
    trial: int
    firing_rate_hz: float
    config: ExperimentConfig


def load_sweep_config(path) -> SweepConfig:
    with open(path) as f:
        data = yaml.safe_load(f)
    unknown = set(data) - {"budget", "base", "space"}
    if unknown:
        raise ConfigError(f"sweep config: unknown keys {sorted(unknown)}")
    for key in ("budget", "base", "space"):
        if key not in data:
            raise ConfigError(f"sweep config: missing key {key!r}")
    return SweepConfig(
        budget=int(data["budget"]),
        base=config_from_dict(data["base"]),
        space=dict(data["space"]),
    )


def _sample_value(spec, rng):
    if not isinstance(spec, dict):
        raise ConfigError(f"space entries must be mappings, got {spec!r}")
    if "choices" in spec:
        choices = list(spec["choices"])
        return choices[int(rng.integers(len(choices)))]
    if "low" not in spec or "high" not in spec:
        raise ConfigError(f"range spec needs low/high or choices: {spec!r}")
    low, high = float(spec["low"]), float(spec["high"])
    if spec.get("int"):
        return int(rng.integers(int(low), int(high) + 1))
    if spec.get("log"):
        if low <= 0:
            raise ConfigError("log-scale ranges require low > 0")
        return float(np.exp(rng.uniform(np.log(low), np.log(high))))
    return float(rng.uniform(low, high))


def _set_path(tree: dict, dotted: str, value):
    node = tree
    parts = dotted.split(".")
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise ConfigError(f"unknown config path {dotted!r}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config path {dotted!r}")
    node[parts[-1]] = value


def sample_config(base: ExperimentConfig, space: dict, rng,
                  trial_seed: int) -> ExperimentConfig:
    tree = config_to_dict(base)
    for dotted, spec in space.items():
        _set_path(tree, dotted, _sample_value(spec, rng))
    tree["seed"] = int(trial_seed)
    return config_from_dict(tree)


def _run_one(args):
    trial, cfg_dict, fast = args
    cfg = config_from_dict(cfg_dict)
    metrics = train(cfg, fast=fast)
    rate = float(np.mean(metrics.firing_rate_hz[-metrics.eval_window:])) \
        if len(metrics.firing_rate_hz) else float("nan")
    return trial, metrics.score, rate


def sweep(sweep_cfg: SweepConfig, seed: int, out_dir=None, workers: int = 1,
          fast: bool = True) -> list[SweepResult]:
    """Sample ``budget`` configs, train each, rank by score (ascending)."""
    rng = np.random.default_rng(seed)
    seeds = np.random.SeedSequence(seed).generate_state(sweep_cfg.budget, dtype=np.uint32)
    configs = [sample_config(sweep_cfg.base, sweep_cfg.space, rng, int(s))
               for s in seeds]
    jobs = [(i, config_to_dict(cfg), fast) for i, cfg in enumerate(configs)]
    scores: dict[int, tuple[float, float]] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for trial, score, rate in pool.map(_run_one, jobs):
                scores[trial] = (score, rate)
    else:
        for job in jobs:
            trial, score, rate = _run_one(job)
            scores[trial] = (score, rate)

    order = sorted(range(len(configs)), key=lambda i: (scores[i][0], i))
    results = [
        SweepResult(
            rank=r,
            score=scores[i][0],
            config_hash=config_hash(configs[i]),
            seed=configs[i].seed,
            trial=i,
            firing_rate_hz=scores[i][1],
            config=configs[i],
        )
        for r, i in enumerate(order)
    ]
    if out_dir is not None:
        write_leaderboard(results, out_dir)
    return results


def write_leaderboard(results: list[SweepResult], out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "leaderboard.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["rank", "score", "config_hash", "seed"])
        for res in results:
            writer.writerow([res.rank, f"{res.score:.6g}", res.config_hash, res.seed])
    sampled = os.path.join(out_dir, "sampled")
    os.makedirs(sampled, exist_ok=True)
    for res in results:
        save_config(res.config, os.path.join(sampled, f"trial_{res.trial:04d}.yaml"))
    save_config(results[0].config, os.path.join(out_dir, "best_config.yaml"))
