"""Pattern-generation target: a fixed random sum of four sinusoids."""
from __future__ import annotations

import numpy as np

FREQS_HZ = (1.0, 2.0, 3.0, 5.0)
AMP_RANGE = (0.5, 2.0)


def make_target(seed, t_steps: int = 1000, dt: float = 1e-3, n_out: int = 1,
                amplitudes=None, phases=None) -> np.ndarray:
    """Target trace of shape (t_steps, n_out).

    Component amplitudes are drawn from U[0.5, 2] and phases from
    U[0, 2*pi), fixed by ``seed`` for a whole run.  ``amplitudes`` /
    ``phases`` (arrays of shape (n_out, 4)) override the draws.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_freq = len(FREQS_HZ)
    amp = rng.uniform(*AMP_RANGE, (n_out, n_freq))
    phi = rng.uniform(0.0, 2.0 * np.pi, (n_out, n_freq))
    if amplitudes is not None:
        amp = np.asarray(amplitudes, dtype=np.float64).reshape(n_out, n_freq)
    if phases is not None:
        phi = np.asarray(phases, dtype=np.float64).reshape(n_out, n_freq)
    t = np.arange(t_steps) * dt
    freqs = np.asarray(FREQS_HZ)
    # (t_steps, n_out, n_freq) -> sum over components
    phase = 2.0 * np.pi * freqs[None, None, :] * t[:, None, None] + phi[None]
    return (amp[None] * np.sin(phase)).sum(axis=2)
