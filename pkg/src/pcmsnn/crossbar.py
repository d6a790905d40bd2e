"""Differential multi-device crossbar with masked batch SET/RESET/READ.

A crossbar holds a ``p x q`` grid of synapses.  Each synapse owns ``2n``
devices: ``n`` on the potentiation (+) side and ``n`` on the depression (-)
side, so device state arrays have shape ``(2, n, p, q)`` (polarity, slot,
row, col).  The effective weight of a synapse is

    W = beta * (sum_k G+_k - sum_k G-_k)

Device masks are boolean ``(2, n, p, q)`` arrays; synapse masks are
``(p, q)``.  Pulse plans carry per-device non-negative SET counts plus a
synapse mask to refresh before pulsing -- the only currency between weight
updaters and the crossbar.

Because SET pulses only move conductances up, a saturating synapse pair is
periodically *refreshed*: both sides are RESET to HRS and the stored
differential is reprogrammed onto the appropriate side.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import devices
from .devices import DeviceModelParams
from .errors import ConfigError

# Default refresh thresholds (µS): trigger when either side exceeds G_HI while
# the pair differential is inside D_LO.
G_HI = 9.0
D_LO = 4.5


class PulseStats(NamedTuple):
    set_pulses: int
    refresh_events: int
    refresh_pulses: int


@dataclass
class DeviceBank:
    """Struct-of-arrays device state, each array of shape (2, n, p, q)."""

    g: np.ndarray
    p_mem: np.ndarray
    t_p: np.ndarray
    count: np.ndarray
    nu: np.ndarray


@dataclass
class PulsePlan:
    """Per-device SET counts plus the synapses to refresh beforehand."""

    pulses: np.ndarray     # (2, n, p, q) non-negative int
    pre_reset: np.ndarray  # (p, q) bool

    def total(self) -> int:
        return int(self.pulses.sum())

    def validate(self, xbar: "Crossbar"):
        if self.pulses.shape != xbar.device_shape:
            raise ConfigError(
                f"plan shape {self.pulses.shape} does not match crossbar {xbar.device_shape}"
            )
        if self.pre_reset.shape != (xbar.p, xbar.q):
            raise ConfigError(
                f"pre_reset shape {self.pre_reset.shape} != {(xbar.p, xbar.q)}"
            )
        if not np.issubdtype(self.pulses.dtype, np.integer):
            raise ConfigError("pulse counts must be integers")
        if (self.pulses < 0).any():
            raise ConfigError("pulse counts must be non-negative")

    @classmethod
    def empty(cls, xbar: "Crossbar") -> "PulsePlan":
        return cls(
            pulses=np.zeros(xbar.device_shape, dtype=np.int64),
            pre_reset=np.zeros((xbar.p, xbar.q), dtype=bool),
        )


class Crossbar:
    """A p x q grid of differential n-device synapses with one RNG stream.

    The crossbar keeps a simulation clock; reads see the drift accumulated
    since each device's last write, and writes are stamped with the current
    clock.  ``queue_ptr`` is the per-synapse circular arbiter that spreads
    consecutive pulses over the n devices of one polarity.
    """

    def __init__(self, p: int, q: int, n: int, params: DeviceModelParams, rng,
                 beta: float | None = None):
        if min(p, q, n) < 1:
            raise ConfigError("crossbar dimensions must be >= 1")
        self.p, self.q, self.n = p, q, n
        self.params = params
        self.rng = rng
        self.beta = float(beta) if beta is not None else 1.0 / (n * (params.g_max - params.g_min))
        if self.beta <= 0:
            raise ConfigError("beta must be positive")
        self.clock = 0.0
        self.queue_ptr = np.zeros((p, q), dtype=np.int64)
        shape = self.device_shape
        g = devices.sample_hrs(shape, params, rng)
        self.bank = DeviceBank(
            g=g,
            p_mem=g.copy(),
            t_p=np.zeros(shape),
            count=np.zeros(shape, dtype=np.int64),
            nu=devices.sample_nu(shape, params, rng),
        )

    @property
    def device_shape(self) -> tuple[int, int, int, int]:
        return (2, self.n, self.p, self.q)

    def advance_clock(self, dt: float):
        if not np.isfinite(dt) or dt < 0:
            raise ValueError(f"clock increment must be finite and >= 0, got {dt}")
        self.clock += dt

    # -- READ ---------------------------------------------------------------

    def read_all(self) -> np.ndarray:
        """One noisy, drifted read per device at the current clock."""
        p = self.params
        if p.perf:
            return self.bank.g.copy()
        elapsed = self.clock - self.bank.t_p
        g_drift = self.bank.g * devices.drift_factor(self.bank.nu, elapsed, p)
        noise = self.rng.standard_normal(g_drift.shape) * (p.read_noise_coeff * g_drift)
        return np.clip(g_drift + noise, p.g_min, p.g_max)

    def read_effective(self, beta: float | None = None) -> np.ndarray:
        """Effective weight matrix beta * (sum G+ - sum G-), shape (p, q)."""
        b = self.beta if beta is None else beta
        if b <= 0:
            raise ConfigError("beta must be positive")
        g = self.read_all()
        return b * (g[0].sum(axis=0) - g[1].sum(axis=0))

    def stored_sums(self) -> tuple[np.ndarray, np.ndarray]:
        """Noiseless, undrifted per-synapse conductance sums (bookkeeping)."""
        return self.bank.g[0].sum(axis=0), self.bank.g[1].sum(axis=0)

    def stored_effective(self, beta: float | None = None) -> np.ndarray:
        b = self.beta if beta is None else beta
        pos, neg = self.stored_sums()
        return b * (pos - neg)

    # -- SET / RESET ---------------------------------------------------------

    def set_masked(self, mask: np.ndarray):
        """Apply one SET pulse to every device selected by a (2,n,p,q) mask."""
        if mask.shape != self.device_shape:
            raise ConfigError(f"mask shape {mask.shape} != {self.device_shape}")
        idx = np.nonzero(mask)
        if idx[0].size == 0:
            return
        p = self.params
        g = self.bank.g[idx]
        if p.perf:
            g_new = np.clip(g + p.pulse_gain(), p.g_min, p.g_max)
        else:
            mu, sigma = devices.write_increment_stats(g, self.bank.p_mem[idx], p)
            g_new = np.clip(g + self.rng.normal(mu, sigma), p.g_min, p.g_max)
        self.bank.g[idx] = g_new
        self.bank.p_mem[idx] = np.maximum(self.bank.p_mem[idx], g_new)
        self.bank.t_p[idx] = self.clock
        self.bank.count[idx] += 1

    def reset_synapses(self, syn_mask: np.ndarray):
        """RESET all 2n devices of the selected synapses to HRS (count kept)."""
        if syn_mask.shape != (self.p, self.q):
            raise ConfigError(f"synapse mask shape {syn_mask.shape} != {(self.p, self.q)}")
        mask = np.broadcast_to(syn_mask, self.device_shape)
        idx = np.nonzero(mask)
        if idx[0].size == 0:
            return
        p = self.params
        g = devices.sample_hrs(idx[0].shape, p, self.rng)
        self.bank.g[idx] = g
        self.bank.p_mem[idx] = g
        self.bank.t_p[idx] = self.clock
        self.bank.nu[idx] = devices.sample_nu(idx[0].shape, p, self.rng)

    # -- Refresh --------------------------------------------------------------

    def needs_refresh(self, g_hi: float = G_HI, d_lo: float = D_LO) -> np.ndarray:
        """Synapses whose pair saturates: any device above g_hi while the
        stored differential stays within d_lo.  Uses stored (noiseless) state."""
        if not (self.params.g_min < g_hi < self.params.g_max):
            raise ConfigError("g_hi must lie inside (g_min, g_max)")
        if not (self.params.g_min < d_lo < self.params.g_max):
            raise ConfigError("d_lo must lie inside (g_min, g_max)")
        pos, neg = self.stored_sums()
        peak = self.bank.g.max(axis=(0, 1))
        return (peak > g_hi) & (np.abs(pos - neg) < d_lo)

    def refresh(self, syn_mask: np.ndarray) -> PulseStats:
        """RESET the selected pairs and reprogram their stored differential.

        The differential is read from stored state (no read noise), both
        sides are re-initialized to HRS, and round(|d| / g_unit) SET pulses
        are applied to the side matching the sign of d, spread over the
        circular queue.
        """
        if not syn_mask.any():
            return PulseStats(0, 0, 0)
        pos, neg = self.stored_sums()
        d = np.where(syn_mask, pos - neg, 0.0)
        self.reset_synapses(syn_mask)
        counts = np.rint(np.abs(d) / self.params.g_unit).astype(np.int64)
        pulses = self.distribute(counts, d > 0)
        self._apply_pulses(pulses)
        return PulseStats(0, int(syn_mask.sum()), int(counts.sum()))

    # -- Pulse plans ------------------------------------------------------------

    def distribute(self, counts: np.ndarray, pos_side: np.ndarray) -> np.ndarray:
        """Spread per-synapse pulse counts over the circular device queue.

        Pulse i of a synapse goes to device (queue_ptr + i) mod n of the
        selected polarity; the pointer advances by the count.  Returns a
        (2, n, p, q) per-device pulse tensor.
        """
        if counts.shape != (self.p, self.q) or pos_side.shape != (self.p, self.q):
            raise ConfigError("counts and pos_side must have shape (p, q)")
        if (counts < 0).any():
            raise ConfigError("pulse counts must be non-negative")
        counts = counts.astype(np.int64)
        k = np.arange(self.n)[:, None, None]
        offset = (k - self.queue_ptr[None]) % self.n
        per_device = counts[None] // self.n + (offset < (counts % self.n)[None])
        pulses = np.zeros(self.device_shape, dtype=np.int64)
        pulses[0] = np.where(pos_side[None], per_device, 0)
        pulses[1] = np.where(pos_side[None], 0, per_device)
        self.queue_ptr = (self.queue_ptr + counts) % self.n
        return pulses

    def _apply_pulses(self, pulses: np.ndarray):
        remaining = int(pulses.max()) if pulses.size else 0
        for r in range(remaining):
            self.set_masked(pulses > r)

    def apply_plan(self, plan: PulsePlan) -> PulseStats:
        """Refresh the flagged synapses, then apply the planned SET pulses."""
        plan.validate(self)
        ref = self.refresh(plan.pre_reset)
        self._apply_pulses(plan.pulses)
        return PulseStats(plan.total(), ref.refresh_events, ref.refresh_pulses)

    # -- Initialization ----------------------------------------------------------

    def program_weights(self, w: np.ndarray, beta: float | None = None) -> int:
        """Program target weights onto the HRS-initialized grid.

        Applies round(|w| / (beta * g_unit)) pulses to the polarity matching
        sign(w).  Used for weight initialization before training; returns the
        number of pulses spent.
        """
        if w.shape != (self.p, self.q):
            raise ConfigError(f"weight shape {w.shape} != {(self.p, self.q)}")
        b = self.beta if beta is None else beta
        counts = np.rint(np.abs(w) / (b * self.params.g_unit)).astype(np.int64)
        pulses = self.distribute(counts, w > 0)
        self._apply_pulses(pulses)
        return int(counts.sum())

    # -- Export --------------------------------------------------------------------

    def snapshot_rows(self):
        """Yield one (polarity, k, row, col, g, p_mem, t_p, count, nu) per device."""
        for pol in range(2):
            for k in range(self.n):
                for r in range(self.p):
                    for c in range(self.q):
                        yield (
                            "+" if pol == 0 else "-",
                            k, r, c,
                            self.bank.g[pol, k, r, c],
                            self.bank.p_mem[pol, k, r, c],
                            self.bank.t_p[pol, k, r, c],
                            int(self.bank.count[pol, k, r, c]),
                            self.bank.nu[pol, k, r, c],
                        )

    def write_csv(self, path):
        import csv

        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["polarity", "k", "row", "col", "g", "p_mem", "t_p", "count", "nu"])
            writer.writerows(self.snapshot_rows())
