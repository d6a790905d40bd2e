"""Statistical model of a single phase-change-memory device.

A device is described by its conductance ``g`` (in µS, referenced to ``t0``
seconds after the last programming pulse), a programming-history level
``p_mem``, the last write time ``t_p``, a cumulative write counter and a
per-device drift exponent ``nu``.

Three operations are supported:

* ``apply_set``  -- one gradual SET (crystallization) pulse; the conductance
  jump is Gaussian with state-dependent mean/std so that repeated pulses
  saturate toward ``g_max``.
* ``read``       -- power-law temporal drift plus conductance-proportional
  read noise.
* ``reset``      -- abrupt melt-quench re-initialization to the
  high-resistance state.

In ``perf`` mode all stochasticity and drift are disabled and a SET pulse
adds exactly ``g_max / 2**cb_res``, turning the device into an ideal
quantized memory cell.

The module-level kernels (``write_increment_stats``, ``drift_factor``, ...)
accept scalars or arrays of any shape; the crossbar module applies them to
whole device grids at once.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError

REALISTIC = "realistic"
PERF = "perf"

# Drift-exponent clip range for amorphous-phase devices.
NU_MIN = 0.0
NU_MAX = 0.12


@dataclass
class DeviceModelParams:
    """Parameters of the statistical device model (conductances in µS)."""

    g_min: float = 0.1
    g_max: float = 12.0
    g_unit: float = 0.75          # mean single-pulse increment on a fresh device
    write_mu_coeffs: tuple[float, float] = (0.1, 1.3)     # (c0, c1)
    write_sigma_coeffs: tuple[float, float] = (0.1, 0.3)  # (s0, s1)
    read_noise_coeff: float = 0.03  # sigma_read = coeff * conductance
    nu_mean: float = 0.05
    nu_std: float = 0.02
    t0: float = 25.0              # s, reference read delay after programming
    hrs_mu: float = 0.1           # µS, post-RESET distribution
    hrs_sigma: float = 0.01
    mode: str = REALISTIC
    cb_res: int = 4               # bits per device in perf mode

    def __post_init__(self):
        self.write_mu_coeffs = tuple(float(c) for c in self.write_mu_coeffs)
        self.write_sigma_coeffs = tuple(float(c) for c in self.write_sigma_coeffs)
        self.validate()

    def validate(self):
        if self.mode not in (REALISTIC, PERF):
            raise ConfigError(f"unknown device mode {self.mode!r}")
        if not self.g_min < self.g_max:
            raise ConfigError("g_min must be < g_max")
        if self.g_unit <= 0:
            raise ConfigError("g_unit must be positive")
        if len(self.write_mu_coeffs) != 2 or len(self.write_sigma_coeffs) != 2:
            raise ConfigError("write coefficient tuples must have two entries")
        if min(self.write_sigma_coeffs) < 0 or self.read_noise_coeff < 0:
            raise ConfigError("noise coefficients must be non-negative")
        if self.nu_std < 0 or self.hrs_sigma < 0:
            raise ConfigError("sigma parameters must be non-negative")
        if self.t0 <= 0:
            raise ConfigError("t0 must be positive")
        if self.cb_res < 1:
            raise ConfigError("cb_res must be >= 1")
        if self.perf and abs(self.g_unit - self.pulse_gain()) > 1e-9:
            raise ConfigError(
                "perf mode requires g_unit == g_max / 2**cb_res "
                f"({self.g_unit} != {self.pulse_gain()})"
            )

    @property
    def perf(self) -> bool:
        return self.mode == PERF

    def pulse_gain(self) -> float:
        """Deterministic per-pulse conductance step of the ideal model."""
        return self.g_max / 2 ** self.cb_res


def write_increment_stats(g, p_mem, params: DeviceModelParams):
    """Mean and std of the conductance jump caused by one SET pulse.

    The mean shrinks linearly with the programmed level (history proxy
    ``max(p_mem, g)``), flooring at ``c0`` near saturation; the std scales
    affinely with the mean.  Works elementwise on arrays.
    """
    c0, c1 = params.write_mu_coeffs
    s0, s1 = params.write_sigma_coeffs
    level = np.maximum(p_mem, g)
    frac = np.clip((level - params.g_min) / (params.g_max - params.g_min), 0.0, 1.0)
    mu = params.g_unit * np.maximum(0.0, 1.0 - c1 * frac) + c0
    sigma = s0 + s1 * mu
    return mu, sigma


def drift_factor(nu, elapsed, params: DeviceModelParams):
    """Power-law decay factor (t/t0)^-nu; no decay within the reference delay."""
    ratio = np.maximum(elapsed, params.t0) / params.t0
    return ratio ** -np.asarray(nu, dtype=float)


def sample_hrs(shape, params: DeviceModelParams, rng):
    """Post-RESET conductances; deterministic ``hrs_mu`` in perf mode."""
    if params.perf:
        return np.full(shape, params.hrs_mu)
    g = rng.normal(params.hrs_mu, params.hrs_sigma, shape)
    return np.clip(g, params.g_min, params.g_max)


def sample_nu(shape, params: DeviceModelParams, rng):
    """Per-device drift exponents; zero (unused) in perf mode."""
    if params.perf:
        return np.zeros(shape)
    return np.clip(rng.normal(params.nu_mean, params.nu_std, shape), NU_MIN, NU_MAX)


@dataclass(frozen=True)
class DeviceState:
    """Immutable record of one device; operations return updated copies."""

    g: float            # µS, conductance at t0 after the last write
    p_mem: float        # µS, programming-history level
    t_p: float = 0.0    # s, last write time
    count: int = 0      # cumulative writes
    nu: float = 0.05    # drift exponent


def fresh_device(params: DeviceModelParams, rng, t: float = 0.0) -> DeviceState:
    """A device iteratively programmed to the high-resistance state at time t."""
    g = float(sample_hrs((), params, rng))
    return DeviceState(g=g, p_mem=g, t_p=t, count=0, nu=float(sample_nu((), params, rng)))


def _check_pulse_time(t: float, t_p: float):
    if not np.isfinite(t):
        raise ValueError(f"pulse time must be finite, got {t}")
    if t < t_p:
        raise ValueError(f"pulse time {t} precedes last write {t_p}")


def apply_set(state: DeviceState, params: DeviceModelParams, t: float, rng) -> DeviceState:
    """Apply one SET pulse at time ``t``."""
    _check_pulse_time(t, state.t_p)
    if params.perf:
        g = min(max(state.g + params.pulse_gain(), params.g_min), params.g_max)
    else:
        mu, sigma = write_increment_stats(state.g, state.p_mem, params)
        dg = rng.normal(float(mu), float(sigma))
        g = min(max(state.g + dg, params.g_min), params.g_max)
    return replace(state, g=g, p_mem=max(state.p_mem, g), t_p=t, count=state.count + 1)


def read(state: DeviceState, params: DeviceModelParams, t: float, rng) -> float:
    """Measured conductance at time ``t`` (drift plus 1/f-style read noise)."""
    _check_pulse_time(t, state.t_p)
    if params.perf:
        return state.g
    g_drift = state.g * float(drift_factor(state.nu, t - state.t_p, params))
    noise = rng.normal(0.0, params.read_noise_coeff * g_drift)
    return min(max(g_drift + noise, params.g_min), params.g_max)


def reset(state: DeviceState, params: DeviceModelParams, t: float, rng) -> DeviceState:
    """Melt-quench RESET: re-initialize to HRS, preserving the write counter."""
    g = float(sample_hrs((), params, rng))
    return DeviceState(
        g=g,
        p_mem=g,
        t_p=t,
        count=state.count,
        nu=float(sample_nu((), params, rng)),
    )
