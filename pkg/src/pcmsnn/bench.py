"""Device-level benchmarks: programming precision and drift curves.

``device_bench`` programs differential synapses from a source to a target
normalized conductance with the multi-device update scheme and reports the
achieved error statistics over many repetitions; spreading the pulses over
n devices per polarity shrinks the write-error std roughly by sqrt(n).
"""
from __future__ import annotations

import csv
import os
from typing import NamedTuple

import numpy as np

from .crossbar import Crossbar, PulsePlan
from .devices import DeviceModelParams
from .errors import ConfigError


class BenchRow(NamedTuple):
    n: int
    g_source: float
    g_target: float
    mean_achieved: float
    mean_error: float
    std: float
    pulses: int


def _inject_source(xbar: Crossbar, source: float):
    """Force every synapse to normalized conductance ``source`` exactly.

    The receiving side is paired to the HRS values of the opposite side so
    (sum+ - sum-)/n == source device-for-device.
    """
    side, other = (0, 1) if source >= 0 else (1, 0)
    xbar.bank.g[side] = xbar.bank.g[other] + abs(source)
    np.clip(xbar.bank.g[side], xbar.params.g_min, xbar.params.g_max, out=xbar.bank.g[side])
    xbar.bank.p_mem[:] = np.maximum(xbar.bank.p_mem, xbar.bank.g)


def device_bench(n_values, sources, targets, repetitions: int,
                 params: DeviceModelParams, seed: int) -> list[BenchRow]:
    """Error statistics of targeted programming over a source/target grid.

    For every (n, source, target) cell, ``repetitions`` synapses are set to
    the source level, programmed toward the target with the multi-device
    pulse rule, and read back as (sum G+ - sum G-)/n at the reference delay.
    """
    sources = [float(s) for s in sources]
    targets = [float(t) for t in targets]
    limit = params.g_max - params.g_min - params.hrs_mu
    for v in sources + targets:
        if abs(v) > limit:
            raise ConfigError(f"grid value {v} outside programmable range +-{limit:.2f}")
    if repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    rows = []
    ss = np.random.SeedSequence(seed)
    for n in n_values:
        for source in sources:
            for target in targets:
                rng = np.random.default_rng(ss.spawn(1)[0])
                xbar = Crossbar(repetitions, 1, n, params, rng)
                _inject_source(xbar, source)
                delta = target - source
                pulse_count = int(np.rint(n * abs(delta) / params.g_unit))
                counts = np.full((repetitions, 1), pulse_count, dtype=np.int64)
                pulses = xbar.distribute(counts, np.full((repetitions, 1), delta > 0))
                xbar.apply_plan(PulsePlan(pulses, np.zeros((repetitions, 1), dtype=bool)))
                xbar.advance_clock(params.t0)
                g = xbar.read_all()
                achieved = (g[0].sum(axis=0) - g[1].sum(axis=0))[:, 0] / n
                rows.append(BenchRow(
                    n=int(n),
                    g_source=source,
                    g_target=target,
                    mean_achieved=float(achieved.mean()),
                    mean_error=float(achieved.mean() - target),
                    std=float(achieved.std()),
                    pulses=pulse_count,
                ))
    return rows


def std_ratio(rows: list[BenchRow], n_hi: int, n_lo: int) -> float:
    """Grid-averaged std(n_hi)/std(n_lo) over matching (source, target) cells."""
    hi = {(r.g_source, r.g_target): r.std for r in rows if r.n == n_hi}
    lo = {(r.g_source, r.g_target): r.std for r in rows if r.n == n_lo}
    cells = sorted(set(hi) & set(lo))
    if not cells:
        raise ConfigError(f"no common grid cells for n={n_hi} and n={n_lo}")
    ratios = [hi[c] / lo[c] for c in cells if lo[c] > 0]
    return float(np.mean(ratios))


def write_bench_csv(rows: list[BenchRow], out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "device_bench.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["n", "g_source", "g_target", "mean_achieved",
                         "mean_error", "std", "pulses"])
        for r in rows:
            writer.writerow([r.n, r.g_source, r.g_target, f"{r.mean_achieved:.5f}",
                             f"{r.mean_error:.5f}", f"{r.std:.5f}", r.pulses])


def drift_demo(params: DeviceModelParams, seed: int, pulses: int = 8,
               repetitions: int = 256, points: int = 40,
               t_max_factor: float = 1e4) -> list[tuple]:
    """Conductance-vs-time curves after a burst of SET pulses at t = 0.

    Returns rows (t_seconds, g_expected, g_read_mean, g_read_std) where
    g_expected applies the drift law to the mean stored conductance.
    """
    rng = np.random.default_rng(seed)
    xbar = Crossbar(repetitions, 1, 1, params, rng)
    counts = np.full((repetitions, 1), pulses, dtype=np.int64)
    device_pulses = xbar.distribute(counts, np.ones((repetitions, 1), dtype=bool))
    xbar.apply_plan(PulsePlan(device_pulses, np.zeros((repetitions, 1), dtype=bool)))
    g0 = float(xbar.bank.g[0].mean())
    nu = float(xbar.bank.nu[0].mean())
    rows = []
    for t in np.geomspace(params.t0, params.t0 * t_max_factor, points):
        xbar.clock = float(t)
        g = xbar.read_all()[0]
        expected = g0 * (t / params.t0) ** (-nu)
        rows.append((float(t), expected, float(g.mean()), float(g.std())))
    return rows


def write_drift_csv(rows, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "drift.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["t_seconds", "g_expected", "g_read_mean", "g_read_std"])
        for t, exp, mean, std in rows:
            writer.writerow([f"{t:.4f}", f"{exp:.5f}", f"{mean:.5f}", f"{std:.5f}"])
