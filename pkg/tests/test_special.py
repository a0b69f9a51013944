import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rcbm.special import beta_fn, log_beta, log_gamma, std_normal_cdf, std_normal_logcdf, std_normal_pdf


def test_cdf_reference_values():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(math.inf) == 1.0
    assert std_normal_cdf(-math.inf) == 0.0
    # 40-digit references computed with mpmath before freezing
    assert abs(std_normal_cdf(1.0) - 0.8413447460685429) < 1e-15
    assert abs(std_normal_cdf(2.5) - 0.9937903346742238648) < 1e-15
    assert abs(std_normal_cdf(-5.0) - 2.866515718791939e-07) < 1e-21


def test_pdf_reference_values():
    assert std_normal_pdf(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-16)
    assert abs(std_normal_pdf(3.0) - 0.0044318484119380075) < 1e-17
    assert std_normal_pdf(1.0) == std_normal_pdf(-1.0)


def test_beta_reference_values():
    assert beta_fn(1.0, 1.0) == pytest.approx(1.0, abs=1e-14)
    assert beta_fn(0.5, 0.5) == pytest.approx(math.pi, abs=1e-13)
    assert abs(beta_fn(0.5, 2.5) - 1.1780972450961724) < 1e-14
    assert log_beta(2.0, 3.0) == pytest.approx(math.log(1 / 12), abs=1e-14)


def test_beta_domain():
    for bad in [(0.0, 1.0), (1.0, -2.0), (51.0, 1.0)]:
        with pytest.raises(ValueError):
            beta_fn(*bad)


def test_log_gamma():
    assert log_gamma(5.0) == pytest.approx(math.log(24.0), abs=1e-14)
    assert log_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), abs=1e-14)


def test_symmetry_on_random_points():
    x = np.random.default_rng(0).uniform(-8, 8, 1000)
    assert np.max(np.abs(std_normal_cdf(x) + std_normal_cdf(-x) - 1.0)) < 1e-14


def test_derivative_matches_pdf():
    x = np.linspace(-5, 5, 201)
    h = 1e-5
    d = (std_normal_cdf(x + h) - std_normal_cdf(x - h)) / (2 * h)
    assert np.max(np.abs(d - std_normal_pdf(x))) < 1e-8


def test_logcdf_far_tail():
    assert std_normal_logcdf(-40.0) == pytest.approx(-804.6084420137538, rel=1e-12)


@given(st.floats(0.01, 5.0), st.floats(0.01, 5.0))
def test_beta_recurrence(x, y):
    assert abs(beta_fn(x, y + 1) - beta_fn(x, y) * y / (x + y)) < 1e-12 * max(1.0, beta_fn(x, y))


@given(st.floats(0.01, 0.99))
def test_beta_reflection(x):
    assert beta_fn(x, 1 - x) == pytest.approx(math.pi / math.sin(math.pi * x), rel=1e-10)


@given(st.floats(0.01, 50.0), st.floats(0.01, 50.0))
def test_beta_symmetric(x, y):
    assert beta_fn(x, y) == pytest.approx(beta_fn(y, x), rel=1e-14)


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_cdf_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert std_normal_cdf(lo) <= std_normal_cdf(hi)
