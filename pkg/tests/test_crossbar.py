import numpy as np
import pytest

from pcmsnn.crossbar import Crossbar, PulsePlan
from pcmsnn.devices import DeviceModelParams
from pcmsnn.errors import ConfigError


def make_xbar(p=1, q=1, n=1, mode="perf", seed=0, **kw):
    params = DeviceModelParams(mode=mode, **kw)
    return Crossbar(p, q, n, params, np.random.default_rng(seed))


def set_pair(xbar, pos, neg, row=0, col=0):
    """Force stored conductances of one synapse (all n devices per side)."""
    xbar.bank.g[0, :, row, col] = pos
    xbar.bank.g[1, :, row, col] = neg
    xbar.bank.p_mem[:] = np.maximum(xbar.bank.p_mem, xbar.bank.g)


def test_read_effective_mapping():
    xbar = make_xbar()
    set_pair(xbar, 6.0, 2.0)
    w = xbar.read_effective(beta=1.0 / 12.0)
    assert w[0, 0] == pytest.approx(1.0 / 3.0)


def test_read_effective_symmetric_pair_is_zero():
    xbar = make_xbar(p=2, q=3, n=2)
    xbar.bank.g[0] = xbar.bank.g[1].copy()
    assert np.allclose(xbar.read_effective(beta=0.7), 0.0)


def test_read_effective_hrs_is_zero():
    xbar = make_xbar(p=2, q=2)  # perf init: both sides exactly at hrs_mu
    assert np.allclose(xbar.read_effective(), 0.0)


def test_differential_antisymmetry():
    xbar = make_xbar(p=3, q=4, n=2, seed=3)
    xbar.bank.g[:] = np.random.default_rng(9).uniform(0.1, 12.0, xbar.bank.g.shape)
    w = xbar.read_effective()
    xbar.bank.g = xbar.bank.g[::-1].copy()
    assert np.allclose(xbar.read_effective(), -w)


def test_apply_plan_zero_is_identity():
    xbar = make_xbar(p=2, q=2, mode="realistic")
    g_before = xbar.bank.g.copy()
    stats = xbar.apply_plan(PulsePlan.empty(xbar))
    assert stats.set_pulses == 0 and stats.refresh_events == 0
    assert np.array_equal(xbar.bank.g, g_before)


def test_apply_plan_perf_linear():
    xbar = make_xbar()
    g0 = xbar.bank.g[0, 0, 0, 0]
    plan = PulsePlan.empty(xbar)
    plan.pulses[0, 0, 0, 0] = 3
    stats = xbar.apply_plan(plan)
    assert stats.set_pulses == 3
    assert xbar.bank.g[0, 0, 0, 0] == pytest.approx(g0 + 3 * 0.75)


def test_apply_plan_counts_unit_entries():
    xbar = make_xbar(p=3, q=3, n=2, mode="realistic", seed=1)
    plan = PulsePlan.empty(xbar)
    rng = np.random.default_rng(2)
    plan.pulses[:] = (rng.random(plan.pulses.shape) < 0.4).astype(np.int64)
    k = int(plan.pulses.sum())
    assert xbar.apply_plan(plan).set_pulses == k


def test_apply_plan_shape_mismatch():
    xbar = make_xbar(p=2, q=2)
    other = make_xbar(p=3, q=2)
    with pytest.raises(ConfigError):
        xbar.apply_plan(PulsePlan.empty(other))


def test_mask_locality():
    # devices with zero planned pulses and no pre_reset stay untouched
    xbar = make_xbar(p=4, q=4, n=2, mode="realistic", seed=5)
    plan = PulsePlan.empty(xbar)
    plan.pulses[0, 0, 1, 2] = 2
    plan.pre_reset[3, 3] = True
    g_before = xbar.bank.g.copy()
    xbar.apply_plan(plan)
    touched = np.zeros_like(g_before, dtype=bool)
    touched[0, 0, 1, 2] = True
    touched[:, :, 3, 3] = True
    assert np.array_equal(xbar.bank.g[~touched], g_before[~touched])
    assert not np.array_equal(xbar.bank.g[touched], g_before[touched])


def test_needs_refresh_thresholds():
    xbar = make_xbar(p=3, q=1)
    set_pair(xbar, 9.5, 7.0, row=0)   # high and close -> refresh
    set_pair(xbar, 9.5, 3.0, row=1)   # difference too large -> keep
    set_pair(xbar, 5.0, 4.0, row=2)   # not saturated -> keep
    mask = xbar.needs_refresh()
    assert mask[0, 0] and not mask[1, 0] and not mask[2, 0]


def test_refresh_hand_trace_perf():
    xbar = make_xbar()
    set_pair(xbar, 9.5, 7.0)
    stats = xbar.refresh(np.ones((1, 1), dtype=bool))
    # d = 2.5 -> round(2.5/0.75) = 3 pulses onto the positive side from HRS
    assert stats.refresh_events == 1 and stats.refresh_pulses == 3
    assert xbar.bank.g[0, 0, 0, 0] == pytest.approx(0.1 + 3 * 0.75)
    assert xbar.bank.g[1, 0, 0, 0] == pytest.approx(0.1)
    d_after = xbar.bank.g[0, 0, 0, 0] - xbar.bank.g[1, 0, 0, 0]
    assert abs(d_after - 2.5) <= 0.75 / 2


def test_refresh_zero_differential():
    xbar = make_xbar()
    set_pair(xbar, 6.0, 6.0)
    stats = xbar.refresh(np.ones((1, 1), dtype=bool))
    assert stats.refresh_pulses == 0
    assert xbar.bank.g[0, 0, 0, 0] == pytest.approx(0.1)
    assert xbar.bank.g[1, 0, 0, 0] == pytest.approx(0.1)


def test_refresh_weight_preservation_realistic():
    # per-synapse weight shift bounded by beta*(g_unit/2 + 4*sigma_w*sqrt(2n))
    xbar = make_xbar(p=40, q=25, mode="realistic", seed=7)
    rng = np.random.default_rng(8)
    xbar.bank.g[0] = rng.uniform(7.0, 11.0, xbar.bank.g[0].shape)
    xbar.bank.g[1] = rng.uniform(7.0, 11.0, xbar.bank.g[1].shape)
    w_before = xbar.stored_effective()
    xbar.refresh(np.ones((xbar.p, xbar.q), dtype=bool))
    w_after = xbar.stored_effective()
    sigma_w = 0.1 + 0.3 * (0.75 + 0.1)  # worst-case write std of the model
    bound = xbar.beta * (0.75 / 2 + 4 * sigma_w * np.sqrt(2 * xbar.n))
    assert np.max(np.abs(w_after - w_before)) <= bound


def test_refresh_preserves_sign_exhaustive_perf():
    # all integer µS pairs; criterion thresholds 9 / 4.5
    levels = np.arange(1.0, 13.0)
    for pos in levels:
        for neg in levels:
            xbar = make_xbar()
            set_pair(xbar, pos, neg)
            need = xbar.needs_refresh()[0, 0]
            assert need == (max(pos, neg) > 9.0 and abs(pos - neg) < 4.5)
            d = pos - neg
            xbar.refresh(np.ones((1, 1), dtype=bool))
            d_after = xbar.bank.g[0, 0, 0, 0] - xbar.bank.g[1, 0, 0, 0]
            assert abs(d_after - d) <= 0.75 / 2 + 1e-9
            if abs(d) >= 0.75:
                assert np.sign(d_after) == np.sign(d)


def test_distribute_circular_queue():
    xbar = make_xbar(n=4)
    xbar.queue_ptr[0, 0] = 3
    counts = np.array([[2]], dtype=np.int64)
    pulses = xbar.distribute(counts, np.array([[True]]))
    assert pulses[0, 3, 0, 0] == 1 and pulses[0, 0, 0, 0] == 1
    assert pulses[0, 1, 0, 0] == 0 and pulses[0, 2, 0, 0] == 0
    assert pulses[1].sum() == 0
    assert xbar.queue_ptr[0, 0] == 1


def test_distribute_wraps_m_larger_than_n():
    xbar = make_xbar(n=3)
    pulses = xbar.distribute(np.array([[7]], dtype=np.int64), np.array([[False]]))
    assert pulses[1, :, 0, 0].tolist() == [3, 2, 2]  # ptr=0: slots 0,1,2,0,1,2,0
    assert xbar.queue_ptr[0, 0] == 7 % 3


def test_program_weights_perf_round_trip():
    xbar = make_xbar(p=2, q=2)
    w = np.array([[0.5, -0.25], [0.0, 1.0]])
    xbar.program_weights(w, beta=1.0 / 11.9)
    got = xbar.stored_effective(beta=1.0 / 11.9)
    quantum = 0.75 / 11.9
    assert np.max(np.abs(got - w)) <= quantum / 2 + 1e-9


def test_clock_validation():
    xbar = make_xbar()
    with pytest.raises(ValueError):
        xbar.advance_clock(-1.0)
    xbar.advance_clock(2.0)
    assert xbar.clock == 2.0


def test_snapshot_csv(tmp_path):
    xbar = make_xbar(p=2, q=3, n=2, mode="realistic")
    path = tmp_path / "snap.csv"
    xbar.write_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "polarity,k,row,col,g,p_mem,t_p,count,nu"
    assert len(lines) == 1 + 2 * 2 * 2 * 3
