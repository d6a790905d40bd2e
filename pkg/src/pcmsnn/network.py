"""Discrete-time leaky integrate-and-fire recurrent network with leaky readout.

One step maps state (v, z, y) through

    v' = alpha * v + W_rec @ z + W_in @ x_t - z * v_th
    z' = H((v' - v_th) / v_th)
    y' = kappa * y + W_out @ z'

i.e. spiking neurons with soft (subtractive) reset feeding a leaky
integrator readout.  The recurrent diagonal carries no self-connections and
is zeroed before use.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import exp

import numpy as np

from .errors import ConfigError


@dataclass
class NetParams:
    n_in: int = 100
    n_rec: int = 100
    n_out: int = 1
    dt: float = 1e-3       # s
    tau_m: float = 0.02    # s, membrane time constant
    tau_out: float = 0.02  # s, readout time constant
    v_th: float = 0.6
    gamma: float = 0.3     # pseudo-derivative amplitude

    def __post_init__(self):
        if min(self.n_in, self.n_rec, self.n_out) < 1:
            raise ConfigError("layer sizes must be >= 1")
        if self.dt <= 0 or self.tau_m <= 0 or self.tau_out <= 0:
            raise ConfigError("dt and time constants must be positive")
        if self.v_th <= 0:
            raise ConfigError("v_th must be positive")

    @property
    def alpha(self) -> float:
        """Membrane decay factor exp(-dt / tau_m)."""
        return exp(-self.dt / self.tau_m)

    @property
    def kappa(self) -> float:
        """Readout decay factor exp(-dt / tau_out)."""
        return exp(-self.dt / self.tau_out)


@dataclass
class NetState:
    v: np.ndarray  # membrane potentials (n_rec,)
    z: np.ndarray  # spike vector (n_rec,)
    y: np.ndarray  # readout (n_out,)

    @classmethod
    def zeros(cls, params: NetParams) -> "NetState":
        return cls(
            v=np.zeros(params.n_rec),
            z=np.zeros(params.n_rec),
            y=np.zeros(params.n_out),
        )


def step(state: NetState, x_t, w_in, w_rec, w_out, params: NetParams):
    """One network update; requires a zero W_rec diagonal (see run_trial).

    Returns (new_state, z, y) with z/y aliasing the new state's arrays.
    """
    v = params.alpha * state.v + w_rec @ state.z + w_in @ x_t - state.z * params.v_th
    z = (v > params.v_th).astype(np.float64)
    y = params.kappa * state.y + w_out @ z
    new = NetState(v=v, z=z, y=y)
    return new, z, y


def check_weights(w_in, w_rec, w_out, params: NetParams):
    shapes = {
        "w_in": (w_in, (params.n_rec, params.n_in)),
        "w_rec": (w_rec, (params.n_rec, params.n_rec)),
        "w_out": (w_out, (params.n_out, params.n_rec)),
    }
    for name, (w, want) in shapes.items():
        if w.shape != want:
            raise ConfigError(f"{name} shape {w.shape} != {want}")
        if not np.isfinite(w).all():
            raise ValueError(f"{name} contains non-finite entries")


def run_trial(x, w_in, w_rec, w_out, params: NetParams):
    """Run a trial from a zero state over the input spike train x (T, n_in).

    Returns (y_trace, raster) of shapes (T, n_out) and (T, n_rec).  The
    recurrent diagonal is zeroed on a copy, so outputs are invariant to
    whatever value the caller left there.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.n_in:
        raise ConfigError(f"input shape {x.shape} incompatible with n_in={params.n_in}")
    check_weights(w_in, w_rec, w_out, params)
    w_rec = w_rec.copy()
    np.fill_diagonal(w_rec, 0.0)
    t_steps = x.shape[0]
    y_trace = np.zeros((t_steps, params.n_out))
    raster = np.zeros((t_steps, params.n_rec))
    state = NetState.zeros(params)
    for t in range(t_steps):
        state, z, y = step(state, x[t], w_in, w_rec, w_out, params)
        raster[t] = z
        y_trace[t] = y
    return y_trace, raster


def readout_trace(raster, w_out, kappa: float):
    """Leaky-integrator readout of an arbitrary raster: y_t = kappa*y_{t-1} + W_out @ r_t."""
    raster = np.asarray(raster, dtype=np.float64)
    t_steps = raster.shape[0]
    y = np.zeros((t_steps, w_out.shape[0]))
    acc = np.zeros(w_out.shape[0])
    for t in range(t_steps):
        acc = kappa * acc + w_out @ raster[t]
        y[t] = acc
    return y


def poisson_input(rate_hz: float, t_steps: int, n_in: int, dt: float, seed) -> np.ndarray:
    """Frozen Poisson spike train: independent Bernoulli(rate*dt) per bin/channel."""
    if rate_hz < 0:
        raise ConfigError("rate must be non-negative")
    prob = rate_hz * dt
    if prob > 1.0:
        raise ConfigError(f"rate*dt = {prob} exceeds 1; decrease rate or dt")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return (rng.random((t_steps, n_in)) < prob).astype(np.float64)


def spike_events(raster) -> np.ndarray:
    """(t, neuron) event list of a binary raster, ordered by time."""
    t, j = np.nonzero(np.asarray(raster))
    return np.column_stack([t, j])


def events_to_csv(path, raster):
    events = spike_events(raster)
    np.savetxt(path, events, fmt="%d", delimiter=",", header="t,neuron", comments="")
