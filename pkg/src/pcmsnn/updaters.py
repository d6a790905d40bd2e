"""Memristor-aware weight-update schemes.

Each planner turns the per-epoch loss gradient of one layer into a
``PulsePlan`` for that layer's crossbar.  All schemes are single-shot: SET
pulses are scheduled without read-verify loops, and a refresh of saturating
differential pairs is flagged before the update is applied.

* ``sign``       -- one pulse against the gradient sign wherever |grad|
  clears the stop-learning threshold ``theta``.
* ``stochastic`` -- one pulse with probability min(1, |grad| / p_scale).
* ``multimem``   -- round(eta * |grad| / (beta * g_unit)) pulses spread over
  the n devices per polarity via the circular queue.
* ``mixed``      -- accumulate eta * grad in high precision and emit pulses
  only for whole multiples of the one-pulse weight quantum beta * g_unit,
  keeping the residual.

The optional update-ready pass replaces updates that would overrun
``g_max`` with a full reset-and-reprogram of the affected synapse.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crossbar import Crossbar, PulsePlan
from .errors import ConfigError

SCHEMES = ("sign", "stochastic", "multimem", "mixed")


@dataclass
class UpdaterConfig:
    scheme: str = "mixed"
    delta: float = 0.063       # nominal sign-scheme step (weight units); on a
                               # crossbar one device pulse realizes it
    theta: float = 1e-3        # stop-learning threshold on |grad| (sign)
    p_scale: float = 1.0       # stochastic probability scale
    n: int = 1                 # devices per polarity, must match the crossbar
    eta: float = 0.01          # learning rate (weight units per unit gradient)
    eta_in: float = 1.0        # per-layer multipliers on eta; applied by the
    eta_rec: float = 1.0       # training loop as gradient pre-scaling
    eta_out: float = 1.0
    g_hi: float = 9.0          # µS, refresh trigger level
    d_lo: float = 4.5          # µS, refresh trigger differential band
    update_ready: bool = False
    grad_clip: float = 0.0     # elementwise |grad| clip; 0 disables

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown update scheme {self.scheme!r}")
        for name in ("delta", "theta", "p_scale", "eta"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if min(self.eta_in, self.eta_rec, self.eta_out) <= 0:
            raise ConfigError("per-layer eta multipliers must be positive")
        if self.grad_clip < 0:
            raise ConfigError("grad_clip must be >= 0")


@dataclass
class AccumulatorState:
    """High-precision accumulated ideal weight change (mixed scheme)."""

    residuals: np.ndarray  # (p, q), weight units

    @classmethod
    def zeros(cls, p: int, q: int) -> "AccumulatorState":
        return cls(residuals=np.zeros((p, q)))


def _check_grads(grads, xbar: Crossbar):
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != (xbar.p, xbar.q):
        raise ConfigError(f"gradient shape {grads.shape} != {(xbar.p, xbar.q)}")
    return grads


def weight_quantum(xbar: Crossbar) -> float:
    """Weight change of one SET pulse under the linear pulse model."""
    return xbar.beta * xbar.params.g_unit


def plan_sign(grads, cfg: UpdaterConfig, xbar: Crossbar) -> PulsePlan:
    """Single pulse per synapse against the gradient sign, gated by theta."""
    grads = _check_grads(grads, xbar)
    pre_reset = xbar.needs_refresh(cfg.g_hi, cfg.d_lo)
    active = np.abs(grads) > cfg.theta
    counts = active.astype(np.int64)
    pulses = xbar.distribute(counts, grads < 0)
    return PulsePlan(pulses=pulses, pre_reset=pre_reset)


def plan_stochastic(grads, cfg: UpdaterConfig, xbar: Crossbar, rng) -> PulsePlan:
    """Single pulse per synapse with probability min(1, |grad| / p_scale)."""
    grads = _check_grads(grads, xbar)
    pre_reset = xbar.needs_refresh(cfg.g_hi, cfg.d_lo)
    prob = np.minimum(1.0, np.abs(grads) / cfg.p_scale)
    fire = rng.random(grads.shape) < prob
    pulses = xbar.distribute(fire.astype(np.int64), grads < 0)
    return PulsePlan(pulses=pulses, pre_reset=pre_reset)


def plan_multimem(grads, cfg: UpdaterConfig, xbar: Crossbar) -> PulsePlan:
    """round(|eta*grad| / quantum) pulses, rotated over the device queue."""
    grads = _check_grads(grads, xbar)
    if cfg.n != xbar.n:
        raise ConfigError(f"updater n={cfg.n} does not match crossbar n={xbar.n}")
    pre_reset = xbar.needs_refresh(cfg.g_hi, cfg.d_lo)
    dg = np.abs(cfg.eta * grads) / xbar.beta          # µS of total conductance
    counts = np.rint(dg / xbar.params.g_unit).astype(np.int64)
    pulses = xbar.distribute(counts, grads < 0)
    return PulsePlan(pulses=pulses, pre_reset=pre_reset)


def plan_mixed(grads, cfg: UpdaterConfig, acc: AccumulatorState,
               xbar: Crossbar) -> tuple[PulsePlan, AccumulatorState]:
    """Accumulate -eta*grad; emit whole pulse quanta, retain the residual."""
    grads = _check_grads(grads, xbar)
    if acc.residuals.shape != (xbar.p, xbar.q):
        raise ConfigError(f"accumulator shape {acc.residuals.shape} != {(xbar.p, xbar.q)}")
    pre_reset = xbar.needs_refresh(cfg.g_hi, cfg.d_lo)
    quantum = weight_quantum(xbar)
    residuals = acc.residuals - cfg.eta * grads
    quanta = np.trunc(residuals / quantum)
    residuals = residuals - quanta * quantum
    counts = np.abs(quanta).astype(np.int64)
    pulses = xbar.distribute(counts, quanta > 0)
    return PulsePlan(pulses=pulses, pre_reset=pre_reset), AccumulatorState(residuals)


def update_ready_adjust(plan: PulsePlan, xbar: Crossbar) -> PulsePlan:
    """Flag synapses whose planned pulses would overrun g_max for a refresh.

    The pre-update refresh rebuilds the stored differential from HRS, so the
    planned pulses then land with full headroom and the synapse reaches the
    post-update differential target instead of clipping.  Checks stored
    conductances against the linear pulse model.
    """
    plan.validate(xbar)
    if plan.total() == 0:
        return plan
    params = xbar.params
    overflow = (xbar.bank.g + plan.pulses * params.g_unit) > params.g_max + 1e-12
    flagged = (overflow & (plan.pulses > 0)).any(axis=(0, 1))
    if not flagged.any():
        return plan
    return PulsePlan(pulses=plan.pulses, pre_reset=plan.pre_reset | flagged)
