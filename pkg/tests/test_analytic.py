import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import norm

from rcbm.analytic import (
    TwoPoint,
    conditional_max_cdf,
    correlation,
    covariance,
    covariance_nu,
    g_moments,
    horizon_for_gap,
    increment_covariance_nu,
    joint_cdf_2d,
    joint_cdf_2d_nu,
    joint_density_h,
    kernel_f,
    running_max_cdf,
    stationary_max_cdf,
    stationary_max_cdf_nu,
    stationary_max_moment,
    tail_crossing_prob,
)
from rcbm.drift import SRPTDrift

UNIT = SRPTDrift(1.0, 1.0, 2.0)


def test_running_max_zero_drift():
    assert running_max_cdf(1.0, 1.0, 0.0, 1.0) == pytest.approx(2 * norm.cdf(1.0) - 1, abs=1e-14)


def test_running_max_endpoints():
    assert running_max_cdf(0.7, 0.0, 1.0, 1.0) == 1.0
    assert running_max_cdf(1.0, math.inf, 1.0, 1.0) == pytest.approx(1 - math.exp(-2), abs=1e-15)
    assert running_max_cdf(1.0, math.inf, -1.0, 1.0) == 0.0


def test_running_max_large_arguments_finite():
    v = running_max_cdf(50.0, 1e4, 30.0, 1.0)
    assert v == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.isfinite(running_max_cdf(np.linspace(0, 200, 50), 1e3, -5.0, 0.3)))


def test_running_max_negative_threshold_rejected():
    with pytest.raises(ValueError):
        running_max_cdf(-0.1, 1.0, 1.0, 1.0)


def test_running_max_matches_kernel_integral():
    # independent route: integrate the killed sub-density over u <= x
    x, t, nu, s = 0.8, 1.7, 0.6, 1.3
    val, _ = integrate.quad(lambda u: kernel_f(u, x, t, nu, s), -40.0, x, epsabs=1e-13)
    assert running_max_cdf(x, t, nu, s) == pytest.approx(val, abs=1e-10)


@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(-3, 3), st.floats(0.2, 3))
def test_running_max_monotone_in_t(x, t, nu, s):
    assert running_max_cdf(x, t * 1.5, nu, s) <= running_max_cdf(x, t, nu, s) + 1e-12


def test_stationary_cdf():
    assert stationary_max_cdf(1.0, 1.0, UNIT) == pytest.approx(1 - math.exp(-4), abs=1e-15)
    assert stationary_max_cdf_nu(0.5, 0.0, 1.0) == 0.0


def test_tail_crossing_identity():
    direct = running_max_cdf(1.0, 2.0, 1.0, 1.0) - (1 - math.exp(-2))
    assert tail_crossing_prob(1.0, 2.0, 1.0, 1.0) == pytest.approx(direct, abs=1e-13)


# the density spikes just above the diagonal near 0; quadpack flags roundoff there
@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_joint_interior_value():
    # frozen after agreement with quadrature of the joint density h
    val = joint_cdf_2d(TwoPoint(1.0, math.inf, 0.5, 1.0), UNIT)
    assert val == pytest.approx(0.8097219340366726, abs=1e-12)
    quad, _ = integrate.dblquad(lambda v, u: joint_density_h(u, v, 2.0, 1.0, 1.0),
                                0.0, 0.5, lambda u: u, lambda u: 1.0, epsabs=1e-10)
    assert val == pytest.approx(quad, abs=1e-7)


def test_joint_below_diagonal_collapses():
    assert joint_cdf_2d_nu(1.0, 0.6, 2.0, 1.0, 1.0) == pytest.approx(1 - math.exp(-1.2), abs=1e-15)


def test_joint_zero_second_drift():
    assert joint_cdf_2d_nu(0.5, 1.0, 2.0, 0.0, 1.0) == 0.0


def test_two_point_validation():
    with pytest.raises(ValueError):
        TwoPoint(2.0, 1.0, 0.1, 0.2)
    with pytest.raises(ValueError):
        joint_cdf_2d_nu(0.1, 0.2, 1.0, 2.0, 1.0)


@given(st.floats(0.01, 3), st.floats(0.01, 3), st.floats(0.2, 4), st.floats(0.05, 0.95))
def test_joint_frechet_bounds(x1, x2, nu1, frac):
    nu2 = nu1 * frac
    j = joint_cdf_2d_nu(x1, x2, nu1, nu2, 1.0)
    f1 = stationary_max_cdf_nu(x1, nu1, 1.0)
    f2 = stationary_max_cdf_nu(x2, nu2, 1.0)
    assert max(0.0, f1 + f2 - 1) - 1e-12 <= j <= min(f1, f2) + 1e-12


@given(st.floats(0.01, 3), st.floats(0.2, 4), st.floats(0.05, 0.95))
def test_joint_marginalizes(x1, nu1, frac):
    nu2 = nu1 * frac
    big = 60.0 / nu2
    assert joint_cdf_2d_nu(x1, big, nu1, nu2, 1.0) == pytest.approx(
        stationary_max_cdf_nu(x1, nu1, 1.0), abs=1e-9)


@given(st.floats(0.05, 2), st.floats(0.05, 2), st.floats(0.5, 3), st.floats(0.1, 0.9))
def test_joint_mixed_difference_nonnegative(x1, dx, nu1, frac):
    nu2 = nu1 * frac
    x2 = x1 + dx
    h = 1e-2
    d = (joint_cdf_2d_nu(x1 + h, x2 + h, nu1, nu2, 1.0) - joint_cdf_2d_nu(x1, x2 + h, nu1, nu2, 1.0)
         - joint_cdf_2d_nu(x1 + h, x2, nu1, nu2, 1.0) + joint_cdf_2d_nu(x1, x2, nu1, nu2, 1.0))
    assert d >= -1e-12


def test_conditional_requires_order():
    with pytest.raises(ValueError):
        conditional_max_cdf(1.0, 0.5, 2.0, 1.0, 1.0)
    assert 0.0 <= conditional_max_cdf(0.5, 1.0, 2.0, 1.0, 1.0) <= 1.0


def test_g_moments_mass_and_covariance():
    mass, xz = g_moments(2.0, 1.0, 1.0)
    assert mass == pytest.approx(1.0, abs=1e-7)
    # E[M1 (M2 - M1)] - E[M1] E[M2 - M1] is the increment covariance
    em1, em2 = 0.25, 0.5
    assert xz - em1 * (em2 - em1) == pytest.approx(increment_covariance_nu(2.0, 1.0, 1.0), abs=1e-7)


def test_covariance_values():
    assert covariance(1.0, math.inf, UNIT) == pytest.approx(0.09375, abs=1e-15)
    assert covariance_nu(1.0, 1.0, 1.0) == pytest.approx(0.25, abs=1e-15)
    assert correlation(1.0, math.inf, UNIT) == pytest.approx(0.75, abs=1e-15)
    with pytest.raises(ValueError):
        covariance_nu(1.0, 0.0, 1.0)


@given(st.floats(0.1, 5), st.floats(0.01, 1.0))
def test_correlation_in_unit_interval(nu1, frac):
    from rcbm.analytic import correlation_nu
    c = correlation_nu(nu1, nu1 * frac)
    assert 0 < c <= 1 + 1e-15


def test_moments():
    assert stationary_max_moment(1.0, 1.0, UNIT) == pytest.approx(0.25, abs=1e-15)
    assert stationary_max_moment(1.0, 3.5, UNIT) == pytest.approx(0.0908728781, rel=1e-9)
    assert stationary_max_moment(1.0, 3.5, UNIT) == pytest.approx(math.gamma(4.5) / 4**3.5, rel=1e-14)
    with pytest.raises(ValueError):
        stationary_max_moment(1.0, 0.5, UNIT)


def test_horizon_for_gap():
    t = horizon_for_gap(2.0, 1.0, 1e-3)
    assert t == pytest.approx(1.354, abs=1e-3)
    xs = np.linspace(1e-3, 6, 20001)
    gap = np.max(running_max_cdf(xs, t, 2.0, 1.0) - stationary_max_cdf_nu(xs, 2.0, 1.0))
    assert gap < 1e-3
    assert gap > 0.95e-3
    # scaling law: T scales as sigma^2 / nu^2
    assert horizon_for_gap(1.0, 2.0, 1e-3) == pytest.approx(t * 16, rel=1e-6)
    with pytest.raises(ValueError):
        horizon_for_gap(0.0, 1.0, 1e-3)


@given(st.floats(-2, 2), st.floats(0.01, 3), st.floats(0.1, 3), st.floats(0.3, 2))
def test_kernel_zero_above_barrier(du, x, t, s):
    assume(du > 0)
    assert kernel_f(x + du, x, t, 1.0, s) == 0.0
