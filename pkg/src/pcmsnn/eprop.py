"""Online, local gradient estimation for the LIF recurrent network.

Per-synapse eligibility traces are combined with per-neuron learning signals
so the full-trial loss gradient accumulates step by step, with no
backpropagation through time:

* ``zbar_in`` / ``zbar_rec`` -- presynaptic spike trains low-pass filtered
  with the membrane decay ``alpha``.
* instantaneous eligibility ``e_ji = h_j * zbar_i`` where ``h`` is the
  triangular pseudo-derivative of the spike nonlinearity.
* ``ebar`` -- eligibilities filtered with the readout decay ``kappa``.
* learning signal ``L_j = sum_k B_kj * err_k`` with ``B`` the feedback
  matrix (readout weights for symmetric feedback, or a fixed random
  projection).

Call convention, once per step, after the network update consumed input
``x_prev`` and spikes ``z_prev`` and produced potentials ``v_t``:

    step_traces(traces, z_prev, x_prev, v_t, params)
    accumulate(grads, traces, y_t, y_star_t, feedback)

``step_traces`` first folds the consumed spikes into the presynaptic
filters, so the eligibility pairs the new pseudo-derivative with exactly
the drive that produced it; the readout filter ``zbar_out`` instead
advances with the *new* spikes (recovered from ``v_t``), which makes the
accumulated readout gradient exact for the trial MSE when ``err_scale`` is
``2 / (T * n_out)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import network
from .errors import ConfigError
from .network import NetParams, NetState


@dataclass
class TraceState:
    zbar_in: np.ndarray    # (n_in,) alpha-filtered input spikes
    zbar_rec: np.ndarray   # (n_rec,) alpha-filtered recurrent spikes
    ebar_in: np.ndarray    # (n_rec, n_in) kappa-filtered eligibilities
    ebar_rec: np.ndarray   # (n_rec, n_rec)
    zbar_out: np.ndarray   # (n_rec,) kappa-filtered spikes for the readout

    @classmethod
    def zeros(cls, params: NetParams) -> "TraceState":
        return cls(
            zbar_in=np.zeros(params.n_in),
            zbar_rec=np.zeros(params.n_rec),
            ebar_in=np.zeros((params.n_rec, params.n_in)),
            ebar_rec=np.zeros((params.n_rec, params.n_rec)),
            zbar_out=np.zeros(params.n_rec),
        )


@dataclass
class GradAccum:
    g_in: np.ndarray   # (n_rec, n_in)
    g_rec: np.ndarray  # (n_rec, n_rec), zero diagonal
    g_out: np.ndarray  # (n_out, n_rec)

    @classmethod
    def zeros(cls, params: NetParams) -> "GradAccum":
        return cls(
            g_in=np.zeros((params.n_rec, params.n_in)),
            g_rec=np.zeros((params.n_rec, params.n_rec)),
            g_out=np.zeros((params.n_out, params.n_rec)),
        )


def pseudo_derivative(v, params: NetParams):
    """Triangular surrogate: gamma * max(0, 1 - |v - v_th| / v_th)."""
    return params.gamma * np.maximum(0.0, 1.0 - np.abs((v - params.v_th) / params.v_th))


def step_traces(traces: TraceState, z_prev, x_prev, v_t, params: NetParams) -> TraceState:
    """Advance all traces by one step (in place; returns the same object)."""
    alpha, kappa = params.alpha, params.kappa
    traces.zbar_in *= alpha
    traces.zbar_in += x_prev
    traces.zbar_rec *= alpha
    traces.zbar_rec += z_prev
    h = pseudo_derivative(v_t, params)
    traces.ebar_in *= kappa
    traces.ebar_in += h[:, None] * traces.zbar_in[None, :]
    traces.ebar_rec *= kappa
    traces.ebar_rec += h[:, None] * traces.zbar_rec[None, :]
    z_t = (v_t > params.v_th).astype(np.float64)
    traces.zbar_out *= kappa
    traces.zbar_out += z_t
    return traces


def accumulate(grads: GradAccum, traces: TraceState, y_t, y_star_t, feedback,
               err_scale: float = 1.0) -> GradAccum:
    """Add one step's learning-signal x eligibility products (in place)."""
    err = (np.asarray(y_t) - np.asarray(y_star_t)) * err_scale
    learning_signal = feedback.T @ err
    grads.g_in += learning_signal[:, None] * traces.ebar_in
    grads.g_rec += learning_signal[:, None] * traces.ebar_rec
    np.fill_diagonal(grads.g_rec, 0.0)
    grads.g_out += np.outer(err, traces.zbar_out)
    return grads


def trial_loss(y, y_star) -> float:
    """Mean squared error over timesteps and output channels."""
    y = np.asarray(y)
    y_star = np.asarray(y_star)
    if y.shape != y_star.shape:
        raise ConfigError(f"trace shapes differ: {y.shape} vs {y_star.shape}")
    return float(np.mean((y - y_star) ** 2))


class TrialResult(NamedTuple):
    loss: float
    grads: GradAccum
    y_trace: np.ndarray
    raster: np.ndarray


def run_trial_with_traces(x, y_star, w_in, w_rec, w_out, params: NetParams,
                          feedback=None, err_scale: float | None = None,
                          fast: bool = True) -> TrialResult:
    """Run one trial from a zero state, accumulating gradients online.

    ``err_scale`` defaults to 2 / (T * n_out) so the returned gradients are
    the gradients of the trial MSE (exactly so for the readout).  With
    ``fast`` a compiled kernel with identical arithmetic is used when
    available; the pure-Python path below is the reference.
    """
    x = np.asarray(x, dtype=np.float64)
    y_star = np.asarray(y_star, dtype=np.float64)
    t_steps = x.shape[0]
    if x.ndim != 2 or x.shape[1] != params.n_in:
        raise ConfigError(f"input shape {x.shape} incompatible with n_in={params.n_in}")
    if y_star.shape != (t_steps, params.n_out):
        raise ConfigError(f"target shape {y_star.shape} != {(t_steps, params.n_out)}")
    network.check_weights(w_in, w_rec, w_out, params)
    if feedback is None:
        feedback = w_out
    if err_scale is None:
        err_scale = 2.0 / (t_steps * params.n_out) if t_steps else 1.0
    w_rec = np.array(w_rec, dtype=np.float64)
    np.fill_diagonal(w_rec, 0.0)

    if fast:
        from . import _kernels

        if _kernels.AVAILABLE:
            return _kernels.fused_trial(
                x, y_star, np.asarray(w_in, dtype=np.float64), w_rec,
                np.asarray(w_out, dtype=np.float64),
                np.asarray(feedback, dtype=np.float64), params, err_scale)

    state = NetState.zeros(params)
    traces = TraceState.zeros(params)
    grads = GradAccum.zeros(params)
    y_trace = np.zeros((t_steps, params.n_out))
    raster = np.zeros((t_steps, params.n_rec))
    for t in range(t_steps):
        z_prev = state.z
        state, z, y = network.step(state, x[t], w_in, w_rec, w_out, params)
        raster[t] = z
        y_trace[t] = y
        step_traces(traces, z_prev, x[t], state.v, params)
        accumulate(grads, traces, y, y_star[t], feedback, err_scale)
    return TrialResult(trial_loss(y_trace, y_star), grads, y_trace, raster)
