"""Training loop: one fixed pattern, one gradient per epoch, pulses to devices.

Every epoch the effective weights are read from the crossbars (one noisy
read per device), the frozen-input trial runs, the online gradient is turned
into pulse plans by the configured update scheme and applied, and the
crossbar clocks advance by the trial duration so drift acts over a growing
horizon.  ``fp32`` mode bypasses the crossbars and applies -eta * grad to
float weights clipped to [-1, 1].
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from . import eprop, network, updaters
from .config import ExperimentConfig
from .crossbar import Crossbar, PulseStats
from .errors import ConfigError
from .task import make_target
from .updaters import AccumulatorState

LAYERS = ("in", "rec", "out")

METRICS_COLUMNS = (
    "epoch", "mse", "firing_rate_hz",
    "pulses_in", "pulses_rec", "pulses_out",
    "refresh_in", "refresh_rec", "refresh_out",
)


@dataclass
class TrialMetrics:
    """Per-epoch records plus end-of-run summaries of one training run."""

    mse: np.ndarray
    firing_rate_hz: np.ndarray
    pulses: dict[str, np.ndarray]      # cumulative WRITE pulses per layer
    refreshes: dict[str, np.ndarray]   # cumulative refresh events per layer
    final_weights: dict[str, np.ndarray]
    programmed_fraction: dict[str, float]  # devices written during training
    device_counts: dict[str, int]
    eval_window: int
    failed: bool = False
    final_y: np.ndarray | None = None
    final_raster: np.ndarray | None = None
    target: np.ndarray | None = None

    @property
    def score(self) -> float:
        """Mean MSE over the final evaluation window (inf for failed runs)."""
        if self.failed or len(self.mse) == 0:
            return float("inf")
        return float(np.mean(self.mse[-self.eval_window:]))


def _layer_dims(cfg: ExperimentConfig) -> dict[str, tuple[int, int]]:
    net = cfg.net
    return {
        "in": (net.n_rec, net.n_in),
        "rec": (net.n_rec, net.n_rec),
        "out": (net.n_out, net.n_rec),
    }


def _tile_dims(cfg: ExperimentConfig, p: int, q: int) -> tuple[int, int]:
    if cfg.crossbar.tile == "square":
        side = max(p, q)
        return side, side
    return p, q


def _init_weights(cfg: ExperimentConfig, rng) -> dict[str, np.ndarray]:
    dims = _layer_dims(cfg)
    stds = {"in": cfg.init.w_in_std, "rec": cfg.init.w_rec_std, "out": cfg.init.w_out_std}
    weights = {}
    for layer, (p, q) in dims.items():
        w = rng.normal(0.0, stds[layer], (p, q)) if stds[layer] > 0 else np.zeros((p, q))
        weights[layer] = np.clip(w, -1.0, 1.0)
    np.fill_diagonal(weights["rec"], 0.0)
    return weights


def _build_crossbars(cfg: ExperimentConfig, w_init, rng_streams) -> dict[str, Crossbar]:
    xbars = {}
    for layer, (p, q) in _layer_dims(cfg).items():
        tp, tq = _tile_dims(cfg, p, q)
        xbar = Crossbar(tp, tq, cfg.crossbar.n, cfg.device,
                        rng_streams[layer], beta=cfg.crossbar.beta)
        w = np.zeros((tp, tq))
        w[:p, :q] = w_init[layer]
        xbar.program_weights(w)
        xbars[layer] = xbar
    return xbars


def train(cfg: ExperimentConfig, out_dir=None, fast: bool = True,
          keep_traces: bool = False) -> TrialMetrics:
    """Run one training experiment; returns full metrics.

    Everything emitted is a pure function of the config and its seeds; when
    ``out_dir`` is given, metrics.csv and weights_final.csv are written there.
    """
    net = cfg.net
    upd = cfg.updater
    fp32 = cfg.mode == "fp32"
    ss = np.random.SeedSequence(cfg.seed)
    streams = ss.spawn(6)
    rng_input, rng_init, rng_updater = (np.random.default_rng(s) for s in streams[:3])
    rng_xbar = dict(zip(LAYERS, (np.random.default_rng(s) for s in streams[3:6])))

    target = make_target(cfg.resolved_pattern_seed, cfg.t_steps, net.dt, net.n_out)
    x = network.poisson_input(cfg.input_rate_hz, cfg.t_steps, net.n_in, net.dt, rng_input)

    w_init = _init_weights(cfg, rng_init)
    if fp32:
        weights = {k: w.copy() for k, w in w_init.items()}
        xbars = None
    else:
        xbars = _build_crossbars(cfg, w_init, rng_xbar)
    dims = _layer_dims(cfg)
    accum = {layer: AccumulatorState.zeros(*(xbars[layer].p, xbars[layer].q))
             for layer in LAYERS} if (not fp32 and upd.scheme == "mixed") else None
    feedback_fixed = None
    if cfg.feedback == "random":
        feedback_fixed = rng_init.normal(0.0, 1.0 / np.sqrt(net.n_rec), (net.n_out, net.n_rec))
    count_start = None if fp32 else {k: xbars[k].bank.count.copy() for k in LAYERS}

    eta_mult = {"in": upd.eta_in, "rec": upd.eta_rec, "out": upd.eta_out}
    trial_sec = cfg.t_steps * net.dt
    mse = np.zeros(cfg.epochs)
    rate = np.zeros(cfg.epochs)
    cum_pulses = {k: np.zeros(cfg.epochs, dtype=np.int64) for k in LAYERS}
    cum_refresh = {k: np.zeros(cfg.epochs, dtype=np.int64) for k in LAYERS}
    totals = {k: PulseStats(0, 0, 0) for k in LAYERS}
    failed = False
    epochs_done = 0
    last = None

    for epoch in range(cfg.epochs):
        if fp32:
            w = {k: weights[k] for k in LAYERS}
        else:
            w = {k: xbars[k].read_effective()[:dims[k][0], :dims[k][1]] for k in LAYERS}
        w_rec = w["rec"].copy()
        np.fill_diagonal(w_rec, 0.0)
        feedback = feedback_fixed if feedback_fixed is not None else w["out"]
        res = eprop.run_trial_with_traces(
            x, target, w["in"], w_rec, w["out"], net, feedback=feedback, fast=fast)
        last = res
        if not np.isfinite(res.loss):
            failed = True
            break

        grads = {"in": res.grads.g_in, "rec": res.grads.g_rec, "out": res.grads.g_out}
        for layer in LAYERS:
            g = grads[layer] * eta_mult[layer]
            if upd.grad_clip > 0:
                g = np.clip(g, -upd.grad_clip, upd.grad_clip)
            grads[layer] = g

        if fp32:
            for layer in LAYERS:
                weights[layer] = np.clip(weights[layer] - upd.eta * grads[layer], -1.0, 1.0)
            np.fill_diagonal(weights["rec"], 0.0)
        else:
            for layer in LAYERS:
                xbar = xbars[layer]
                g = np.zeros((xbar.p, xbar.q))
                g[:dims[layer][0], :dims[layer][1]] = grads[layer]
                if upd.scheme == "sign":
                    plan = updaters.plan_sign(g, upd, xbar)
                elif upd.scheme == "stochastic":
                    plan = updaters.plan_stochastic(g, upd, xbar, rng_updater)
                elif upd.scheme == "multimem":
                    plan = updaters.plan_multimem(g, upd, xbar)
                else:
                    plan, accum[layer] = updaters.plan_mixed(g, upd, accum[layer], xbar)
                if upd.update_ready:
                    plan = updaters.update_ready_adjust(plan, xbar)
                stats = xbar.apply_plan(plan)
                t = totals[layer]
                totals[layer] = PulseStats(
                    t.set_pulses + stats.set_pulses,
                    t.refresh_events + stats.refresh_events,
                    t.refresh_pulses + stats.refresh_pulses,
                )
                xbar.advance_clock(trial_sec)

        mse[epoch] = res.loss
        rate[epoch] = res.raster.mean() / net.dt
        for layer in LAYERS:
            cum_pulses[layer][epoch] = totals[layer].set_pulses + totals[layer].refresh_pulses
            cum_refresh[layer][epoch] = totals[layer].refresh_events
        epochs_done = epoch + 1

    if failed:
        mse = mse[:epochs_done]
        rate = rate[:epochs_done]
        cum_pulses = {k: v[:epochs_done] for k, v in cum_pulses.items()}
        cum_refresh = {k: v[:epochs_done] for k, v in cum_refresh.items()}

    if fp32:
        final_w = {k: weights[k].copy() for k in LAYERS}
        programmed = {k: 0.0 for k in LAYERS}
        device_counts = {k: 0 for k in LAYERS}
    else:
        final_w = {k: xbars[k].stored_effective()[:dims[k][0], :dims[k][1]] for k in LAYERS}
        programmed = {k: float((xbars[k].bank.count > count_start[k]).mean()) for k in LAYERS}
        device_counts = {k: int(np.prod(xbars[k].device_shape)) for k in LAYERS}

    metrics = TrialMetrics(
        mse=mse,
        firing_rate_hz=rate,
        pulses=cum_pulses,
        refreshes=cum_refresh,
        final_weights=final_w,
        programmed_fraction=programmed,
        device_counts=device_counts,
        eval_window=cfg.eval_window,
        failed=failed,
        final_y=last.y_trace if (keep_traces and last is not None) else None,
        final_raster=last.raster if (keep_traces and last is not None) else None,
        target=target if keep_traces else None,
    )
    if out_dir is not None:
        write_metrics(metrics, out_dir)
    return metrics


def write_metrics(metrics: TrialMetrics, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "metrics.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(METRICS_COLUMNS)
        for e in range(len(metrics.mse)):
            writer.writerow([
                e, f"{metrics.mse[e]:.6g}", f"{metrics.firing_rate_hz[e]:.4f}",
                metrics.pulses["in"][e], metrics.pulses["rec"][e], metrics.pulses["out"][e],
                metrics.refreshes["in"][e], metrics.refreshes["rec"][e],
                metrics.refreshes["out"][e],
            ])
    with open(os.path.join(out_dir, "weights_final.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["layer", "row", "col", "effective_weight"])
        for layer, w in metrics.final_weights.items():
            for r in range(w.shape[0]):
                for c in range(w.shape[1]):
                    writer.writerow([layer, r, c, f"{w[r, c]:.6g}"])


def write_plots(metrics: TrialMetrics, out_dir):
    """Optional SVG plots (loss curve, raster, target vs generated)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(metrics.mse)
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE")
    ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "loss.svg"))
    plt.close(fig)

    if metrics.final_raster is not None:
        events = network.spike_events(metrics.final_raster)
        fig, ax = plt.subplots(figsize=(6, 3))
        if len(events):
            ax.plot(events[:, 0], events[:, 1], ".k", markersize=1)
        ax.set_xlabel("timestep")
        ax.set_ylabel("neuron")
        fig.tight_layout()
        fig.savefig(os.path.join(out_dir, "raster.svg"))
        plt.close(fig)

    if metrics.final_y is not None and metrics.target is not None:
        fig, ax = plt.subplots(figsize=(6, 3))
        ax.plot(metrics.target[:, 0], label="target")
        ax.plot(metrics.final_y[:, 0], label="generated")
        ax.set_xlabel("timestep")
        ax.legend()
        fig.tight_layout()
        fig.savefig(os.path.join(out_dir, "pattern.svg"))
        plt.close(fig)
