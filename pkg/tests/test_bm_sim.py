import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from rcbm.analytic import running_max_cdf
from rcbm.bm_sim import (
    EXCEEDED,
    InitialCondition,
    detect_coupling_time,
    envelope_survival,
    mc_field_extremes,
    mc_first_passage,
    mc_recurrence_check,
    mc_reflected,
    sample_field,
    sample_stationary_max,
    skorokhod_reflect,
    stream_rng,
)
from rcbm.drift import SRPTDrift

UNIT = SRPTDrift(1.0, 1.0, 2.0)
RAMP = InitialCondition("ramp", c=2.0, scale=1.0)


def test_stream_rng_reproducible_and_distinct():
    a = stream_rng(3, 0, 0).standard_normal(4)
    assert np.array_equal(a, stream_rng(3, 0, 0).standard_normal(4))
    assert not np.array_equal(a, stream_rng(3, 1, 0).standard_normal(4))
    with pytest.raises(ValueError):
        stream_rng(-1)


def test_initial_condition_values():
    assert RAMP.w(math.inf) == 2.0
    assert RAMP.w(1.0) == pytest.approx(2.0 * (1 - math.exp(-1)), abs=1e-15)
    tab = InitialCondition("tabulated", a_knots=(1.0, 2.0), w_knots=(1.0, 3.0))
    assert tab.w(0.5) == 0.5
    assert tab.w(1.5) == 2.0
    assert tab.w(10.0) == 3.0
    assert tab.w_inf == 3.0
    assert InitialCondition().w(np.array([1.0, 2.0])).tolist() == [0.0, 0.0]


def test_initial_condition_validation_and_roundtrip():
    with pytest.raises(ValueError):
        InitialCondition("spiky")
    with pytest.raises(ValueError):
        InitialCondition("tabulated", a_knots=(1.0, 2.0), w_knots=(3.0, 1.0))
    with pytest.raises(ValueError):
        InitialCondition.from_dict({"kind": "ramp", "slope": 1})
    for ic in (RAMP, InitialCondition(), InitialCondition("tabulated", a_knots=(1.0,), w_knots=(2.0,))):
        assert InitialCondition.from_dict(ic.to_dict()) == ic


def test_skorokhod_examples():
    assert skorokhod_reflect([1.0, -1.0, 2.0]).tolist() == [1.0, 0.0, 3.0]
    assert skorokhod_reflect([0.0, 0.5, 0.25]).tolist() == [0.0, 0.5, 0.25]
    with pytest.raises(ValueError):
        skorokhod_reflect([])
    with pytest.raises(ValueError):
        skorokhod_reflect([-0.1, 1.0])


@given(arrays(float, 30, elements=st.floats(-5, 5)), arrays(float, 30, elements=st.floats(-5, 5)))
def test_skorokhod_lipschitz(x, y):
    x[0] = abs(x[0])
    y[0] = abs(y[0])
    lhs = np.max(np.abs(skorokhod_reflect(x) - skorokhod_reflect(y)))
    assert lhs <= 2 * np.max(np.abs(x - y)) + 1e-12


@given(arrays(float, 30, elements=st.floats(-5, 5)))
def test_skorokhod_nonnegative(x):
    x[0] = abs(x[0])
    assert np.all(skorokhod_reflect(x) >= 0)


def test_sample_field_zero_noise():
    a = np.array([0.5, 1.0, 4.0])
    f = sample_field(UNIT, InitialCondition(), a, 1.0, 0.1, seed=0, zero_noise=True)
    assert np.all(f.w_field == 0.0)
    g = sample_field(UNIT, RAMP, a, 1.0, 0.1, seed=0, zero_noise=True, include_inf=True)
    mu = UNIT.mu(g.a_grid)
    expect = np.maximum(RAMP.w(g.a_grid)[None, :] - mu[None, :] * g.t_grid[:, None], 0.0)
    assert np.allclose(g.w_field, expect, atol=1e-14)
    assert g.a_grid[-1] == math.inf
    rows = list(g.csv_rows())
    assert len(rows) == g.t_grid.size * g.a_grid.size


def test_sample_field_validation():
    with pytest.raises(ValueError):
        sample_field(UNIT, RAMP, [2.0, 1.0], 1.0, 0.1, 0)
    with pytest.raises(ValueError):
        sample_field(UNIT, RAMP, [1.0], 1.0, 0.0, 0)


@given(st.integers(0, 10_000))
def test_field_monotone_in_size(seed):
    f = sample_field(UNIT, RAMP, [0.2, 0.5, 1.0, 3.0], 2.0, 0.05, seed, include_inf=True)
    assert np.all(np.diff(f.w_field, axis=1) >= -1e-12)
    assert np.all(f.w_field >= 0)


@given(st.integers(0, 10_000))
def test_field_monotone_in_initial_condition(seed):
    a = [0.5, 1.0, 3.0]
    lo = sample_field(UNIT, InitialCondition(), a, 2.0, 0.05, seed)
    hi = sample_field(UNIT, RAMP, a, 2.0, 0.05, seed)
    assert np.all(hi.w_field >= lo.w_field - 1e-12)


def test_bridge_max_exact_at_coarse_step():
    n = 20000
    res = mc_field_extremes([1.0], 1.0, 2.0, 0.25, n, seed=11)
    ks = stats.kstest(res["max"][:, 0], lambda x: running_max_cdf(np.maximum(x, 0), 2.0, 1.0, 1.0))
    assert ks.pvalue > 1e-3
    plain = mc_field_extremes([1.0], 1.0, 2.0, 0.25, n, seed=11, bridge=False)
    assert plain["max"].mean() < res["max"].mean()


def test_field_extremes_reproducible():
    a = mc_field_extremes([2.0, 1.0], 1.0, 1.0, 0.1, 3000, seed=5)
    b = mc_field_extremes([2.0, 1.0], 1.0, 1.0, 0.1, 3000, seed=5)
    assert np.array_equal(a["max"], b["max"])
    assert np.all(a["max"][:, 1] >= a["max"][:, 0])


def test_reflected_law_matches_running_max():
    w = mc_reflected([1.0], 1.0, 1.5, 0.1, 20000, seed=3)[:, 0]
    ks = stats.kstest(w, lambda x: running_max_cdf(np.maximum(x, 0), 1.5, 1.0, 1.0))
    assert ks.pvalue > 1e-3
    assert np.array_equal(mc_reflected([1.0, 2.0], 1.0, 0.0, 0.1, 5, 0, w=[0.3, 0.1])[0], [0.3, 0.1])


def test_stationary_max_draws():
    v = sample_stationary_max(UNIT, 1.0, 1e-3, 1e-2, seed=0)
    assert isinstance(v, float) and v >= 0
    draws = sample_stationary_max(UNIT, 1.0, 1e-3, 1e-2, seed=0, n=20000)
    assert abs(draws.mean() - 0.25) < 4 * 0.25 / math.sqrt(20000) + 1e-3
    with pytest.raises(ValueError):
        sample_stationary_max(SRPTDrift(1.0, 0.0, 2.0), math.inf, 1e-3, 1e-2, 0)


def test_envelope_survival_single_line():
    n = 20000
    wts = envelope_survival([([(1.0, 0.5)], 0.0, 2.0)], 1.0, 2.0, 0.1, n, seed=4)[:, 0]
    exact = running_max_cdf(0.5, 2.0, 1.0, 1.0)
    se = wts.std(ddof=1) / math.sqrt(n)
    assert abs(wts.mean() - exact) < 4 * se
    assert np.all((wts >= 0) & (wts <= 1))


def test_first_passage():
    assert np.all(mc_first_passage(0.0, 1.0, 1.0, 0.1, 1.0, 5, 0) == 0)
    n = 20000
    t = mc_first_passage(0.5, 1.0, 1.0, 0.1, 2.0, n, seed=8)
    p = np.mean(np.isfinite(t))
    # hitting 0 from 0.5 with drift -1 is the max of the mirrored path exceeding 0.5
    exact = 1 - running_max_cdf(0.5, 2.0, -1.0, 1.0)
    assert abs(p - exact) < 4 * math.sqrt(exact * (1 - exact) / n)


def test_coupling_and_recurrence():
    assert detect_coupling_time(UNIT, InitialCondition(), 0.01, 0, 10.0) == 0.0
    assert detect_coupling_time(UNIT, InitialCondition("ramp", c=50.0), 0.01, 0, 1.0) == EXCEEDED
    t = detect_coupling_time(UNIT, RAMP, 0.01, 0, 100.0)
    assert 0 < t < 100
    assert mc_recurrence_check(UNIT, InitialCondition(), 1.0, 0.01, 50, 0) == 1.0
    frac = mc_recurrence_check(UNIT, RAMP, 40.0, 0.01, 2000, 1)
    assert frac > 0.99


def test_thread_count_does_not_change_output():
    from rcbm.bm_sim import set_threads
    base = mc_field_extremes([2.0, 1.0], 1.0, 1.0, 0.05, 5000, seed=9)["max"]
    try:
        set_threads(3)
        threaded = mc_field_extremes([2.0, 1.0], 1.0, 1.0, 0.05, 5000, seed=9)["max"]
    finally:
        set_threads(1)
    assert np.array_equal(base, threaded)
    with pytest.raises(ValueError):
        set_threads(0)
