import math
from dataclasses import replace

import numpy as np
import pytest

from pcmsnn import devices
from pcmsnn.devices import DeviceModelParams, DeviceState
from pcmsnn.errors import ConfigError


@pytest.fixture
def params():
    return DeviceModelParams()


@pytest.fixture
def perf_params():
    return DeviceModelParams(mode="perf")


def test_perf_set_step(perf_params):
    # 12 / 2**4 = 0.75
    state = DeviceState(g=2.0, p_mem=2.0)
    out = devices.apply_set(state, perf_params, 0.0, np.random.default_rng(0))
    assert out.g == pytest.approx(2.75, abs=1e-12)


def test_fresh_device_mean_increment(params):
    # Monte-Carlo mean of the first SET jump on an HRS device
    rng = np.random.default_rng(1)
    jumps = []
    for _ in range(10_000):
        d = devices.fresh_device(params, rng)
        jumps.append(devices.apply_set(d, params, 0.0, rng).g - d.g)
    assert 0.6 <= np.mean(jumps) <= 0.9


def test_set_respects_upper_bound(params):
    rng = np.random.default_rng(2)
    d = DeviceState(g=12.0, p_mem=12.0)
    for _ in range(5):
        d = devices.apply_set(d, params, d.t_p, rng)
        assert d.g <= 12.0


def test_read_drift_closed_form(params):
    # G * (100*t0 / t0)^-nu with read noise disabled
    noiseless = replace(params, read_noise_coeff=0.0)
    d = DeviceState(g=10.0, p_mem=10.0, t_p=0.0, nu=0.05)
    got = devices.read(d, noiseless, 100.0 * params.t0, np.random.default_rng(0))
    expected = 10.0 * math.pow(100.0, -0.05)
    assert got == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(7.943, abs=5e-4)


def test_read_no_drift_no_noise(params):
    noiseless = replace(params, read_noise_coeff=0.0)
    d = DeviceState(g=5.0, p_mem=5.0, t_p=0.0, nu=0.0)
    assert devices.read(d, noiseless, 1e6, np.random.default_rng(0)) == pytest.approx(5.0)


def test_read_at_reference_delay_returns_g(params):
    # drift identity: elapsed == t0 gives factor 1 for any nu
    noiseless = replace(params, read_noise_coeff=0.0)
    d = DeviceState(g=7.3, p_mem=7.3, t_p=2.0, nu=0.11)
    assert devices.read(d, noiseless, 2.0 + params.t0, np.random.default_rng(0)) == 7.3


def test_read_noise_grows_with_conductance(params):
    nodrift_hi = DeviceState(g=10.0, p_mem=10.0, nu=0.0)
    nodrift_lo = DeviceState(g=1.0, p_mem=1.0, nu=0.0)
    rng = np.random.default_rng(3)
    hi = [devices.read(nodrift_hi, params, 0.0, rng) for _ in range(20_000)]
    lo = [devices.read(nodrift_lo, params, 0.0, rng) for _ in range(20_000)]
    assert np.std(hi) > np.std(lo)


def test_reset_distribution(params):
    rng = np.random.default_rng(4)
    d = DeviceState(g=9.0, p_mem=10.0, t_p=5.0, count=7, nu=0.05)
    samples = [devices.reset(d, params, 6.0, rng) for _ in range(10_000)]
    g = np.array([s.g for s in samples])
    assert 0.095 <= g.mean() <= 0.105
    assert g.min() >= params.g_min and g.max() <= params.g_max
    assert all(s.count == 7 for s in samples[:10])  # counter is cumulative
    assert all(s.t_p == 6.0 for s in samples[:10])


def test_perf_reset_exact(perf_params):
    d = DeviceState(g=9.0, p_mem=10.0, count=3)
    out = devices.reset(d, perf_params, 1.0, np.random.default_rng(0))
    assert out.g == 0.1
    assert out.count == 3


def test_perf_mode_deterministic(perf_params):
    def run(seed):
        rng = np.random.default_rng(seed)
        d = devices.fresh_device(perf_params, rng, 0.0)
        vals = []
        for t in range(5):
            d = devices.apply_set(d, perf_params, float(t), rng)
            vals.append(devices.read(d, perf_params, float(t) + 1.0, rng))
        d = devices.reset(d, perf_params, 10.0, rng)
        vals.append(d.g)
        return vals

    assert run(0) == run(12345)


def test_perf_saturation_pulse_count(perf_params):
    # ceil((g_max - g_min) / g_unit) pulses from HRS to full scale
    rng = np.random.default_rng(0)
    d = devices.fresh_device(perf_params, rng)
    expected = math.ceil((perf_params.g_max - perf_params.g_min) / perf_params.g_unit)
    pulses = 0
    while d.g < perf_params.g_max:
        d = devices.apply_set(d, perf_params, 0.0, rng)
        pulses += 1
        assert pulses <= expected
    assert pulses == expected


def test_conductance_bounds_under_random_ops(params):
    rng = np.random.default_rng(5)
    d = devices.fresh_device(params, rng)
    t = 0.0
    for _ in range(300):
        op = rng.integers(3)
        t += float(rng.random())
        if op == 0:
            d = devices.apply_set(d, params, t, rng)
        elif op == 1:
            val = devices.read(d, params, t, rng)
            assert params.g_min <= val <= params.g_max
        else:
            d = devices.reset(d, params, t, rng)
        assert params.g_min <= d.g <= params.g_max
        assert d.nu >= 0.0


def test_write_response_is_concave(params):
    # mean cumulative conductance over consecutive pulses saturates
    rng = np.random.default_rng(6)
    n_dev, k_max = 1000, 20
    curves = np.zeros((n_dev, k_max))
    for i in range(n_dev):
        d = devices.fresh_device(params, rng)
        for k in range(k_max):
            d = devices.apply_set(d, params, 0.0, rng)
            curves[i, k] = d.g
    mean = curves.mean(axis=0)
    increments = np.diff(mean)
    # saturating response: per-pulse gains shrink (windowed against MC noise)
    windows = [increments[i:i + 5].mean() for i in range(0, 15, 5)]
    assert windows[0] > windows[1] > windows[2]
    assert (np.diff(increments) <= 0.01).all()


def test_monotone_counters(params):
    rng = np.random.default_rng(7)
    d = devices.fresh_device(params, rng)
    d1 = devices.apply_set(d, params, 1.0, rng)
    d2 = devices.apply_set(d1, params, 2.0, rng)
    assert d2.count == d1.count + 1 == d.count + 2
    assert d2.t_p >= d1.t_p >= d.t_p


def test_pulse_time_preconditions(params):
    rng = np.random.default_rng(8)
    d = DeviceState(g=1.0, p_mem=1.0, t_p=5.0)
    with pytest.raises(ValueError):
        devices.apply_set(d, params, 4.0, rng)
    with pytest.raises(ValueError):
        devices.read(d, params, 4.9, rng)
    with pytest.raises(ValueError):
        devices.apply_set(d, params, float("nan"), rng)


def test_param_validation():
    with pytest.raises(ConfigError):
        DeviceModelParams(g_min=5.0, g_max=1.0)
    with pytest.raises(ConfigError):
        DeviceModelParams(mode="perf", g_unit=0.6)  # != g_max / 2**cb_res
    with pytest.raises(ConfigError):
        DeviceModelParams(read_noise_coeff=-0.1)
    with pytest.raises(ConfigError):
        DeviceModelParams(mode="bogus")
