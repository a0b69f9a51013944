"""Special functions used by the closed-form laws.

Thin, validated wrappers around :mod:`scipy.special`. ``ndtr`` is accurate to
a few ulp over the whole real line (it switches to ``erfc`` in the tails), and
``log_ndtr`` keeps the far left tail representable, which the running-maximum
formulas need when an exponential prefactor is huge.
"""

import math

import numpy as np
from scipy import special as _sp

__all__ = [
    "std_normal_cdf",
    "std_normal_logcdf",
    "std_normal_pdf",
    "log_gamma",
    "beta_fn",
    "log_beta",
    "BETA_ARG_MAX",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

#: Largest argument accepted by :func:`beta_fn`.
BETA_ARG_MAX = 50.0


def std_normal_cdf(x):
    """Standard normal CDF. Accepts scalars or arrays, including +-inf."""
    out = _sp.ndtr(x)
    return float(out) if np.ndim(out) == 0 else out


def std_normal_logcdf(x):
    """Natural log of the standard normal CDF."""
    out = _sp.log_ndtr(x)
    return float(out) if np.ndim(out) == 0 else out


def std_normal_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    out = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return float(out) if out.ndim == 0 else out


def log_gamma(x):
    """log|Gamma(x)|."""
    out = _sp.gammaln(x)
    return float(out) if np.ndim(out) == 0 else out


def _check_beta_args(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(~(x > 0)) or np.any(~(y > 0)):
        raise ValueError("beta_fn requires x > 0 and y > 0")
    if np.any(x > BETA_ARG_MAX) or np.any(y > BETA_ARG_MAX):
        raise ValueError(f"beta_fn arguments must not exceed {BETA_ARG_MAX}")
    return x, y


def log_beta(x, y):
    """log B(x, y) via log-gamma, for 0 < x, y <= 50."""
    x, y = _check_beta_args(x, y)
    out = _sp.gammaln(x) + _sp.gammaln(y) - _sp.gammaln(x + y)
    return float(out) if out.ndim == 0 else out


def beta_fn(x, y):
    """Beta function B(x, y) = int_0^1 t^(x-1) (1-t)^(y-1) dt.

    Raises
    ------
    ValueError
        If either argument is not in (0, 50].
    """
    x, y = _check_beta_args(x, y)
    out = _sp.beta(x, y)
    return float(out) if out.ndim == 0 else out
