"""Compiled trial kernel: forward pass, traces and gradient accumulation fused.

Arithmetic follows eprop.run_trial_with_traces step for step; a unit test
pins the two paths against each other.  Falls back gracefully when numba is
unavailable (``AVAILABLE`` is False and the reference path is used).
"""
from __future__ import annotations

import numpy as np

try:
    from numba import njit

    AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


@njit(cache=True)
def _trial_kernel(x, y_star, w_in, w_rec, w_out, feedback,
                  alpha, kappa, v_th, gamma, err_scale):
    t_steps, n_in = x.shape
    n_rec = w_rec.shape[0]
    n_out = w_out.shape[0]

    v = np.zeros(n_rec)
    z = np.zeros(n_rec)
    y = np.zeros(n_out)
    zbar_in = np.zeros(n_in)
    zbar_rec = np.zeros(n_rec)
    zbar_out = np.zeros(n_rec)
    ebar_in = np.zeros((n_rec, n_in))
    ebar_rec = np.zeros((n_rec, n_rec))
    g_in = np.zeros((n_rec, n_in))
    g_rec = np.zeros((n_rec, n_rec))
    g_out = np.zeros((n_out, n_rec))
    h = np.zeros(n_rec)
    learning = np.zeros(n_rec)
    err = np.zeros(n_out)
    y_trace = np.zeros((t_steps, n_out))
    raster = np.zeros((t_steps, n_rec))
    spike_idx = np.empty(n_rec, dtype=np.int64)
    input_idx = np.empty(n_in, dtype=np.int64)

    for t in range(t_steps):
        # forward: spikes and inputs are sparse binary vectors
        n_spk = 0
        for i in range(n_rec):
            if z[i] != 0.0:
                spike_idx[n_spk] = i
                n_spk += 1
        n_inp = 0
        for i in range(n_in):
            if x[t, i] != 0.0:
                input_idx[n_inp] = i
                n_inp += 1
        for j in range(n_rec):
            acc = alpha * v[j] - z[j] * v_th
            for s in range(n_spk):
                acc += w_rec[j, spike_idx[s]]
            for s in range(n_inp):
                acc += w_in[j, input_idx[s]]
            v[j] = acc

        # presynaptic filters advance with the spikes this step consumed
        for i in range(n_in):
            zbar_in[i] = alpha * zbar_in[i] + x[t, i]
        for i in range(n_rec):
            zbar_rec[i] = alpha * zbar_rec[i] + z[i]

        for j in range(n_rec):
            z[j] = 1.0 if v[j] > v_th else 0.0
            raster[t, j] = z[j]
        for k in range(n_out):
            acc = kappa * y[k]
            for j in range(n_rec):
                acc += w_out[k, j] * z[j]
            y[k] = acc
            y_trace[t, k] = acc
            err[k] = (acc - y_star[t, k]) * err_scale

        for j in range(n_rec):
            a = abs((v[j] - v_th) / v_th)
            h[j] = gamma * (1.0 - a) if a < 1.0 else 0.0
        for j in range(n_rec):
            acc = 0.0
            for k in range(n_out):
                acc += feedback[k, j] * err[k]
            learning[j] = acc

        for j in range(n_rec):
            hj = h[j]
            lj = learning[j]
            for i in range(n_in):
                e = kappa * ebar_in[j, i] + hj * zbar_in[i]
                ebar_in[j, i] = e
                g_in[j, i] += lj * e
            for i in range(n_rec):
                e = kappa * ebar_rec[j, i] + hj * zbar_rec[i]
                ebar_rec[j, i] = e
                g_rec[j, i] += lj * e
        for j in range(n_rec):
            zbar_out[j] = kappa * zbar_out[j] + z[j]
            for k in range(n_out):
                g_out[k, j] += err[k] * zbar_out[j]

    for j in range(n_rec):
        g_rec[j, j] = 0.0
    return g_in, g_rec, g_out, y_trace, raster


def fused_trial(x, y_star, w_in, w_rec, w_out, feedback, params, err_scale):
    from .eprop import GradAccum, TrialResult, trial_loss

    g_in, g_rec, g_out, y_trace, raster = _trial_kernel(
        x, y_star, w_in, w_rec, w_out, feedback,
        params.alpha, params.kappa, params.v_th, params.gamma, err_scale)
    grads = GradAccum(g_in=g_in, g_rec=g_rec, g_out=g_out)
    return TrialResult(trial_loss(y_trace, y_star), grads, y_trace, raster)
