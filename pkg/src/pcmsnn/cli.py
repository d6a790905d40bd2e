"""Command-line interface: train / sweep / device-bench / drift-demo.

Every subcommand takes ``--config <file>`` plus optional ``--seed`` and
``--out`` overrides; all outputs are deterministic given config and seed.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np
import yaml

from . import bench, search, training
from .config import config_from_dict, load_config
from .devices import DeviceModelParams
from .errors import ConfigError


def _grid(spec) -> list[float]:
    """A value grid: an explicit list or {low, high, step}."""
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    if isinstance(spec, dict):
        unknown = set(spec) - {"low", "high", "step"}
        if unknown:
            raise ConfigError(f"grid spec: unknown keys {sorted(unknown)}")
        low, high = float(spec["low"]), float(spec["high"])
        step = float(spec.get("step", 1.0))
        if step <= 0:
            raise ConfigError("grid step must be positive")
        return list(np.arange(low, high + step / 2, step))
    raise ConfigError(f"grid spec must be a list or low/high/step mapping: {spec!r}")


def _load_section_config(path, required, optional):
    with open(path) as f:
        data = yaml.safe_load(f) or {}
    unknown = set(data) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(data)
    if missing:
        raise ConfigError(f"{path}: missing keys {sorted(missing)}")
    return data


def cmd_train(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out_dir = args.out or cfg.out
    metrics = training.train(cfg, out_dir=out_dir, keep_traces=args.plots)
    if args.plots and out_dir:
        training.write_plots(metrics, out_dir)
    status = "FAILED" if metrics.failed else "ok"
    rate = np.mean(metrics.firing_rate_hz[-cfg.eval_window:]) if len(metrics.firing_rate_hz) else float("nan")
    print(f"[{status}] score={metrics.score:.5g} firing_rate={rate:.2f} Hz "
          f"epochs={len(metrics.mse)}")
    if out_dir:
        print(f"wrote metrics to {out_dir}")
    return 1 if metrics.failed else 0


def cmd_sweep(args):
    sweep_cfg = search.load_sweep_config(args.config)
    seed = args.seed if args.seed is not None else sweep_cfg.base.seed
    results = search.sweep(sweep_cfg, seed=seed, out_dir=args.out,
                           workers=args.workers)
    best = results[0]
    print(f"best score={best.score:.5g} hash={best.config_hash} seed={best.seed}")
    for res in results[: min(10, len(results))]:
        print(f"  rank {res.rank:3d}  score={res.score:.5g}  trial={res.trial}")
    if args.out:
        print(f"wrote leaderboard to {args.out}")
    return 0


def cmd_device_bench(args):
    data = _load_section_config(
        args.config,
        required=("n_values", "g_source", "g_target", "repetitions"),
        optional=("device", "seed"),
    )
    params = DeviceModelParams(**data.get("device", {}))
    seed = args.seed if args.seed is not None else int(data.get("seed", 0))
    rows = bench.device_bench(
        n_values=[int(n) for n in data["n_values"]],
        sources=_grid(data["g_source"]),
        targets=_grid(data["g_target"]),
        repetitions=int(data["repetitions"]),
        params=params,
        seed=seed,
    )
    n_values = sorted({r.n for r in rows})
    for n in n_values:
        sub = [r for r in rows if r.n == n]
        print(f"n={n}: mean |error|={np.mean([abs(r.mean_error) for r in sub]):.4f} µS, "
              f"mean std={np.mean([r.std for r in sub]):.4f} µS")
    if len(n_values) > 1:
        lo = n_values[0]
        for n in n_values[1:]:
            print(f"std ratio n={n} vs n={lo}: {bench.std_ratio(rows, n, lo):.4f}")
    if args.out:
        bench.write_bench_csv(rows, args.out)
        print(f"wrote device_bench.csv to {args.out}")
    return 0


def cmd_drift_demo(args):
    data = _load_section_config(
        args.config,
        required=(),
        optional=("device", "seed", "pulses", "repetitions", "points", "t_max_factor"),
    )
    params = DeviceModelParams(**data.get("device", {}))
    seed = args.seed if args.seed is not None else int(data.get("seed", 0))
    rows = bench.drift_demo(
        params, seed,
        pulses=int(data.get("pulses", 8)),
        repetitions=int(data.get("repetitions", 256)),
        points=int(data.get("points", 40)),
        t_max_factor=float(data.get("t_max_factor", 1e4)),
    )
    print(f"drift over {rows[0][0]:.0f}..{rows[-1][0]:.0f} s: "
          f"G {rows[0][2]:.3f} -> {rows[-1][2]:.3f} µS")
    if args.out:
        bench.write_drift_csv(rows, args.out)
        print(f"wrote drift.csv to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcmsnn",
        description="Spiking-RNN training on simulated PCM crossbars",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training experiment")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", default=None)
    p_train.add_argument("--plots", action="store_true",
                         help="also write SVG plots (needs matplotlib)")
    p_train.set_defaults(func=cmd_train)

    p_sweep = sub.add_parser("sweep", help="random hyperparameter search")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_bench = sub.add_parser("device-bench", help="programming-precision benchmark")
    p_bench.add_argument("--config", required=True)
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.add_argument("--out", default=None)
    p_bench.set_defaults(func=cmd_device_bench)

    p_drift = sub.add_parser("drift-demo", help="conductance drift curves")
    p_drift.add_argument("--config", required=True)
    p_drift.add_argument("--seed", type=int, default=None)
    p_drift.add_argument("--out", default=None)
    p_drift.set_defaults(func=cmd_drift_demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
