import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcbm.srpt_sim import (
    ScalingParams,
    fifo_queue_path,
    littles_law_stats,
    littles_row,
    pareto_tail_integral,
    queue_length_at,
    run_srpt,
    s_inverse,
    simulate_trace,
)


def test_tail_integral_values():
    assert pareto_tail_integral(3.0, 3.0, 1.0) == pytest.approx(6.0, abs=1e-14)
    assert pareto_tail_integral(0.2, 3.0, 1.0) == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert s_inverse(6.0, 3.0, 1.0) == pytest.approx(3.0, abs=1e-14)
    assert s_inverse(0.1, 3.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        pareto_tail_integral(1.0, 1.0, 1.0)


@given(st.floats(2.05, 6.0), st.floats(0.1, 3.0), st.floats(1.01, 1e3))
def test_s_inverse_round_trip(alpha, x_m, mult):
    x = x_m * mult
    assert s_inverse(pareto_tail_integral(x, alpha, x_m), alpha, x_m) == pytest.approx(x, rel=1e-9)


def test_scaling_params():
    sp = ScalingParams(r=10.0, p=2.0)
    assert sp.alpha == 3.0
    assert sp.mean_v == pytest.approx(1.0, abs=1e-15)
    assert sp.var_v == pytest.approx(1 / 3, abs=1e-15)
    assert sp.lambda_r == pytest.approx(0.9, abs=1e-15)
    assert sp.lambda_tilde == pytest.approx(1.0, abs=1e-15)
    assert sp.sigma_tilde**2 == pytest.approx(4 / 3, abs=1e-14)
    assert sp.c_r == pytest.approx(s_inverse(10.0, 3.0, 2 / 3), rel=1e-14)
    assert ScalingParams(r=10.0, p=2.0, arrival="gamma", gamma_shape=4.0).sigma_tilde**2 == pytest.approx(
        0.25 + 1 / 3, abs=1e-14)
    with pytest.raises(ValueError, match="p must exceed 1"):
        ScalingParams(r=10.0, p=0.5)
    with pytest.raises(ValueError):
        ScalingParams(r=0.5, p=2.0)


def test_single_initial_job():
    res = simulate_trace([], [], q0=[5.0], record_path=True)
    assert res["departures"].tolist() == [5.0]
    assert res["path_counts"].tolist() == [1, 0]


def test_initial_jobs_shortest_first_with_preemption():
    # q0 lists v_0 >= v_-1; departures come back in index order (v_-1, v_0, arrivals)
    res = simulate_trace([0.0], [1.0], q0=[5.0, 2.0])
    assert res["departures"].tolist() == [3.0, 8.0, 1.0]


def test_preemption_delays_long_job():
    res = simulate_trace([1.0], [1.0], q0=[3.0])
    assert res["departures"].tolist() == [4.0, 2.0]


def test_no_preemption_by_longer_job():
    res = simulate_trace([1.0], [5.0], q0=[3.0])
    assert res["departures"].tolist() == [3.0, 8.0]


def test_departure_before_arrival_at_tie():
    res = simulate_trace([2.0], [1.0], q0=[2.0], sample_times=[2.0])
    rem, n_arr, n_dep, _ = res["samples"][0]
    assert n_dep == 1 and n_arr == 1
    assert rem.tolist() == [1.0]


def test_unsorted_q0_rejected():
    with pytest.raises(ValueError):
        simulate_trace([], [], q0=[1.0, 2.0])
    with pytest.raises(ValueError):
        simulate_trace([], [], q0=[-1.0])
    with pytest.raises(ValueError):
        simulate_trace([2.0, 1.0], [1.0, 1.0])


def test_until_leaves_jobs_in_system():
    res = simulate_trace([0.0], [10.0], until=3.0, sample_times=[3.0])
    assert math.isinf(res["departures"][0])
    rem, _, _, served = res["samples"][0]
    assert rem.tolist() == [7.0]
    assert served == pytest.approx(3.0)


def test_zero_traffic_drains():
    sp = ScalingParams(r=10.0, p=2.0)
    run = run_srpt(sp, 1.0, [0.0, 0.25, 1.0], q0=[30.0, 20.0], trace=([], []))
    assert run.count.tolist() == [2, 1, 0]
    assert run.workload.tolist() == pytest.approx([5.0, 2.5, 0.0], abs=1e-12)


def test_fifo_path():
    t, c = fifo_queue_path([1.0], [1.0], q0=[3.0])
    assert queue_length_at([0.5, 1.5, 3.5, 4.5], t, c).tolist() == [1, 2, 1, 0]


@settings(max_examples=25)
@given(st.integers(0, 10_000))
def test_conservation_and_dominance(seed):
    rng = np.random.default_rng(seed)
    n = 60
    at = np.cumsum(rng.exponential(1.0, n))
    sz = 0.5 * (1 + rng.pareto(2.5, n))
    q0 = np.sort(rng.uniform(0.1, 3.0, 3))[::-1]
    sample = np.linspace(0, at[-1], 17)
    res = simulate_trace(at, sz, q0=q0, sample_times=sample, record_path=True)
    cum = np.concatenate([[0.0], np.cumsum(sz)])
    for rem, na, nd, served in res["samples"]:
        assert abs(q0.sum() + cum[na] - served - rem.sum()) < 1e-9
        assert na + len(q0) - nd == rem.size
    # SRPT never holds more jobs than FIFO on the same trace
    ft, fc = fifo_queue_path(at, sz, q0)
    grid = np.union1d(res["path_times"], ft)
    mids = 0.5 * (grid[1:] + grid[:-1])
    mids = mids[np.diff(grid) > 1e-9]
    srpt_q = queue_length_at(mids, res["path_times"], res["path_counts"])
    fifo_q = queue_length_at(mids, ft, fc)
    assert np.all(srpt_q <= fifo_q)


def test_run_srpt_scaling_and_atoms():
    sp = ScalingParams(r=10.0, p=2.0)
    run = run_srpt(sp, 5.0, [0.0, 2.5, 5.0], seed=3)
    assert np.all(run.conservation_error < 1e-8)
    for (loc, w), cnt, q in zip(run.atoms, run.count, run.queue):
        assert loc.size == cnt
        assert w == pytest.approx(sp.c_r / sp.r)
        assert q == pytest.approx(w * cnt)
    rows = list(run.snapshot_rows())
    assert len(rows) == int(run.count.sum())
    again = run_srpt(sp, 5.0, [0.0, 2.5, 5.0], seed=3)
    assert np.array_equal(run.workload, again.workload)
    with pytest.raises(ValueError):
        run_srpt(sp, 1.0, [2.0])


def test_littles_rhs_value():
    sp = ScalingParams(r=10.0, p=2.0)
    run = run_srpt(sp, 20.0, np.arange(0, 20.01, 0.5), seed=1)
    row = littles_row(sp, run, 20.0)
    # E[v] E[Z*] with E[v] = 1 and Poisson variance sigma~^2 = 4/3
    assert row["rhs"] == pytest.approx(math.pi / 3, abs=1e-12)
    assert row["lhs"] > 0 and row["lhs_se"] > 0
    assert 0 <= row["ks_workload"] <= 1


def test_short_warmup_warns():
    sp = ScalingParams(r=10.0, p=2.0)
    run = run_srpt(sp, 1.0, [0.0, 1.0], trace=([], []))
    with pytest.warns(RuntimeWarning, match="busy cycles"):
        littles_row(sp, run, 1.0)


def test_littles_law_stats_rows():
    rows = littles_law_stats([5.0, 10.0], T=20.0, seed=0)
    assert [r["r"] for r in rows] == [5.0, 10.0]
    assert all(math.isfinite(r["ratio"]) for r in rows)

