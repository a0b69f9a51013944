"""Measure-valued functionals of a size-indexed field and SRPT queue-length moments.

A nondecreasing field ``g`` with ``g(0) = 0`` defines the measure

    <1_[0,a]> = int_0^a g(x)/x^2 dx + g(a)/a,

whose total mass is ``int_0^inf g(x)/x^2 dx``. Applied to the maximum field
``M_*``, the total mass is the stationary scaled SRPT queue length ``Z_*``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .analytic import horizon_for_gap
from .bm_sim import mc_field_extremes
from .drift import SRPTDrift
from .special import beta_fn

__all__ = [
    "MeasureSnapshot",
    "field_to_measure",
    "integrate_field",
    "srpt_mean_Zstar",
    "srpt_var_Zstar",
    "srpt_var_Zstar_beta",
    "srpt_var_Zstar_consistent",
    "srpt_cov_increment",
    "srpt_mean_Zstar_quadrature",
    "mc_Zstar",
    "zstar_grid",
    "srpt_mean_Zstar_head",
]


@dataclass
class MeasureSnapshot:
    a_grid: np.ndarray
    cdf_values: np.ndarray
    total_mass: float
    tail: float


def _piece_integrals(x, g):
    """int_{x_k}^{x_{k+1}} g/t^2 dt for g interpolated as a power law in log-log space.

    Falls back to linear interpolation of ``g`` when an endpoint is zero or the
    power law is not well defined.
    """
    x0, x1 = x[:-1], x[1:]
    g0, g1 = g[:-1], g[1:]
    out = np.empty(x0.shape)
    pos = (g0 > 0) & (g1 > 0)
    # power law g = g0 (t/x0)^k, integrand g0 x0^-k t^(k-2)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.log(g1 / g0) / np.log(x1 / x0)
        e = k - 1.0
        r = x1 / x0
        pw = np.where(np.abs(e) > 1e-10, g0 / x0 * np.expm1(e * np.log(r)) / e, g0 / x0 * np.log(r))
    # linear g = g0 + s (t - x0): int = (g0 - s x0)(1/x0 - 1/x1) + s log(x1/x0)
    s = (g1 - g0) / (x1 - x0)
    lin = (g0 - s * x0) * (1.0 / x0 - 1.0 / x1) + s * np.log(x1 / x0)
    out[:] = np.where(pos, pw, lin)
    return out


def _head_integral(x0, x1, g0, g1):
    """int_0^{x0} g/t^2 for the power law through (x0, g0), (x1, g1); inf if g/t does not vanish."""
    if g0 <= 0:
        return 0.0
    if g1 <= g0:
        return math.inf
    k = math.log(g1 / g0) / math.log(x1 / x0)
    if k <= 1.0:
        return math.inf
    return g0 / x0 / (k - 1.0)


def _interp_field(a, g, idx, x):
    """Field values at ``x`` with the same interpolant as :func:`_piece_integrals`."""
    g0, g1 = g[idx], g[idx + 1]
    x0, x1 = a[idx], a[idx + 1]
    lin = g0 + (g1 - g0) * (x - x0) / (x1 - x0)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.log(g1 / g0) / np.log(x1 / x0)
        pw = g0 * (x / x0) ** k
    return np.where((g0 > 0) & (g1 > 0) & np.isfinite(pw), pw, lin)


def field_to_measure(a_grid, g, a_eval=None, g_inf=None):
    """Evaluate ``<1_[0,a]>`` and the total mass from field values on a grid.

    Parameters
    ----------
    a_grid : increasing positive sizes.
    g : field values (nonnegative, nondecreasing) on ``a_grid``.
    a_eval : points at which to report ``<1_[0,a]>``; defaults to ``a_grid``.
        Points must lie in ``[a_grid[0], a_grid[-1]]``.
    g_inf : field value at infinity, used for the tail ``g_inf / a_max``;
        defaults to ``g[-1]``.

    Below the first grid point ``g`` is continued as the power law through the
    first two points (``g(x)/x -> 0`` is required, i.e. exponent above 1).
    """
    a = np.asarray(a_grid, dtype=float)
    g = np.asarray(g, dtype=float)
    if a.ndim != 1 or a.size < 2 or a.size != g.size:
        raise ValueError("need matching 1-d a_grid and g with at least two points")
    if np.any(a <= 0) or np.any(np.diff(a) <= 0):
        raise ValueError("a_grid must be positive and strictly increasing")
    if np.any(g < 0):
        raise ValueError("field values must be nonnegative")
    if np.any(np.diff(g) < 0):
        raise ValueError("field values must be nondecreasing")
    head = _head_integral(a[0], a[1], g[0], g[1])
    cum = np.concatenate([[head], head + np.cumsum(_piece_integrals(a, g))])
    g_inf = g[-1] if g_inf is None else float(g_inf)
    tail = g_inf / a[-1]
    total = cum[-1] + tail
    if a_eval is None:
        cdf = cum + g / a
        a_out = a
    else:
        a_out = np.atleast_1d(np.asarray(a_eval, dtype=float))
        if np.any(a_out < a[0]) or np.any(a_out > a[-1]):
            raise ValueError("a_eval must lie within the grid")
        idx = np.clip(np.searchsorted(a, a_out, side="right") - 1, 0, a.size - 2)
        ge = _interp_field(a, g, idx, a_out)
        part = np.array([_piece_integrals(np.array([a[i], v]), np.array([g[i], gv]))[0] if v > a[i] else 0.0
                         for i, v, gv in zip(idx, a_out, ge)])
        cdf = cum[idx] + part + ge / a_out
    return MeasureSnapshot(a_out, cdf, float(total), float(tail))


def integrate_field(a_grid, G, g_inf=None):
    """Row-wise ``int_{a_0}^{a_max} g/x^2 dx + g_inf/a_max`` for a matrix of fields.

    Vectorized core of :func:`field_to_measure` for Monte Carlo use; the head
    below ``a_0`` is left to the caller.
    """
    a = np.asarray(a_grid, dtype=float)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    x0, x1 = a[:-1], a[1:]
    g0, g1 = G[:, :-1], G[:, 1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.log(g1 / g0) / np.log(x1 / x0)
        e = k - 1.0
        lr = np.log(x1 / x0)
        pw = np.where(np.abs(e) > 1e-10, g0 / x0 * np.expm1(e * lr) / e, g0 / x0 * lr)
    s = (g1 - g0) / (x1 - x0)
    lin = (g0 - s * x0) * (1.0 / x0 - 1.0 / x1) + s * lr
    pieces = np.where((g0 > 0) & (g1 > 0) & np.isfinite(pw), pw, lin)
    tail = (G[:, -1] if g_inf is None else np.asarray(g_inf, dtype=float)) / a[-1]
    return pieces.sum(axis=1) + tail


def _check_srpt(kappa, lambda_tilde, p, sigma_tilde):
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not (kappa > 0 and lambda_tilde > 0 and sigma_tilde > 0):
        raise ValueError("kappa, lambda_tilde and sigma_tilde must be positive")


def srpt_mean_Zstar(kappa, lambda_tilde, p, sigma_tilde):
    """E[Z_*] = (s^2 / 2k) (k/l)^(1/p) (pi/p) / sin(pi/p)."""
    _check_srpt(kappa, lambda_tilde, p, sigma_tilde)
    q = math.pi / p
    return sigma_tilde**2 / (2.0 * kappa) * (kappa / lambda_tilde) ** (1.0 / p) * q / math.sin(q)


def srpt_var_Zstar(kappa, lambda_tilde, p, sigma_tilde):
    """Var[Z_*]; the ``p = 2`` value is ``5 s^4 / (12 k l)``."""
    _check_srpt(kappa, lambda_tilde, p, sigma_tilde)
    if p == 2:
        return 5.0 * sigma_tilde**4 / (12.0 * kappa * lambda_tilde)
    q = math.pi / p
    return (sigma_tilde**4 / (4.0 * kappa**2) * (kappa / lambda_tilde) ** (2.0 / p)
            * (p * p + 2.0 * p + 2.0) / (p * p * (p + 1.0))
            * q / math.sin(q) * (p - 2.0) / math.cos(q))


def srpt_var_Zstar_beta(kappa, lambda_tilde, p, sigma_tilde):
    """Var[Z_*] from the Beta-function form ``2(p^2+2p+2)(p-2)/(p^3(p+1)) * pi/sin(2 pi/p)``.

    At ``p = 2`` the ratio ``(p-2)/sin(2 pi/p)`` is replaced by its limit ``1/pi``.
    """
    _check_srpt(kappa, lambda_tilde, p, sigma_tilde)
    pref = sigma_tilde**4 / (4.0 * kappa**2) * (kappa / lambda_tilde) ** (2.0 / p)
    poly = 2.0 * (p * p + 2.0 * p + 2.0) / (p**3 * (p + 1.0))
    if p == 2:
        return pref * poly * 2.0  # (p-2) pi / sin(2 pi/p) -> p^2/2 = 2
    return pref * poly * (p - 2.0) * math.pi / math.sin(2.0 * math.pi / p)


def srpt_var_Zstar_consistent(kappa, lambda_tilde, p, sigma_tilde):
    """Var[Z_*] obtained by integrating the pairwise covariance kernel exactly.

    ``Var = int int Cov(M(a), M(b)) / (a^2 b^2)`` with
    ``Cov = s^4 (2 mu(a) - mu(b)) / (4 mu(a)^3)`` for ``a < b`` evaluates to

        s^4/(4 k^2) (k/l)^(2/p) (2/p) (p+2)/(p+1) B(2/p, 2 - 2/p),

    which is ``s^4 / (3 k l)`` at ``p = 2``. This differs from
    :func:`srpt_var_Zstar`; see the project notes.
    """
    _check_srpt(kappa, lambda_tilde, p, sigma_tilde)
    pref = sigma_tilde**4 / (4.0 * kappa**2) * (kappa / lambda_tilde) ** (2.0 / p)
    return pref * (2.0 / p) * (p + 2.0) / (p + 1.0) * beta_fn(2.0 / p, 2.0 - 2.0 / p)


def srpt_cov_increment(a1, a2, kappa, lambda_tilde, p, sigma_tilde):
    """Cov(M_*(a1), M_*(a2) - M_*(a1)) under the SRPT drift; ``a2 = inf`` allowed."""
    _check_srpt(kappa, lambda_tilde, p, sigma_tilde)
    if not 0 < a1 <= a2:
        raise ValueError("need 0 < a1 <= a2")
    ratio = 0.0 if math.isinf(a2) else (a1 / a2) ** p
    ap = a1**p
    return sigma_tilde**4 * lambda_tilde * ap * ap / (4.0 * (kappa * ap + lambda_tilde) ** 3) * (1.0 - ratio)


def srpt_mean_Zstar_quadrature(kappa, lambda_tilde, p, sigma_tilde):
    """(s^2/2) int_0^inf dx / (x^2 mu(x)) two ways: direct quadrature and a Beta integral.

    With ``x = c s``, ``c = (lambda/kappa)^(1/p)``, the integrand becomes
    ``s^(p-2) / (c kappa (1 + s^p))``.
    """
    _check_srpt(kappa, lambda_tilde, p, sigma_tilde)
    c = (lambda_tilde / kappa) ** (1.0 / p)

    def f(s):
        # x = c s: 1/(x^2 mu) = s^(p-2) / (c lambda (1 + s^p))
        return s ** (p - 2.0) / (1.0 + s**p)

    head, _ = integrate.quad(f, 0.0, 1.0, epsabs=0, epsrel=1e-13, limit=200)
    tail, _ = integrate.quad(f, 1.0, math.inf, epsabs=0, epsrel=1e-13, limit=200)
    scale = sigma_tilde**2 / (2.0 * c * kappa)
    # with t = 1/(s^p + 1) the s-integral is B(1 - 1/p, 1/p) / p
    return scale * (head + tail), scale * beta_fn(1.0 - 1.0 / p, 1.0 / p) / p


def srpt_mean_Zstar_head(spec: SRPTDrift, a0):
    """E[int_0^a0 M_*(x)/x^2 dx] = int_0^a0 sigma^2 / (2 mu(x) x^2) dx."""
    s2 = spec.sigma**2
    val, _ = integrate.quad(lambda x: s2 / (2.0 * float(spec.mu(x)) * x * x), 0.0, a0,
                            epsabs=0, epsrel=1e-12)
    return val


def zstar_grid(kappa, lambda_tilde, p, n_points=200, lo=1e-3, hi=1e3):
    """Log-spaced sizes around the natural scale ``(lambda/kappa)^(1/p)``."""
    c = (lambda_tilde / kappa) ** (1.0 / p)
    return np.logspace(math.log10(lo * c), math.log10(hi * c), n_points)


def mc_Zstar(kappa, lambda_tilde, p, sigma_tilde, N, dt, seed, n_points=200, cdf_gap=1e-3,
             bridge=True, return_samples=False):
    """Monte Carlo of the mean and variance of ``Z_* = int_0^inf M_*(x)/x^2 dx``.

    One replicate simulates the coupled maximum field ``M_*(a_j)`` on shared
    noise over a log-spaced grid plus ``a = inf``. The horizon is the cdf-gap
    horizon of the flattest drift ``kappa``, which covers every grid point.
    Below the grid the integral is replaced by its mean,
    ``s^2/(2 lambda) a_min^(p-1)/(p-1)`` to leading order; beyond the grid
    the tail is ``M_*(inf)/a_max``.
    """
    spec = SRPTDrift(kappa, lambda_tilde, p, sigma_tilde)
    a = zstar_grid(kappa, lambda_tilde, p, n_points)
    mu = np.append(spec.mu(a), kappa)
    T = horizon_for_gap(kappa, sigma_tilde, cdf_gap)
    # the largest drift reaches its maximum on the time scale (sigma/mu)^2
    t_min = 0.01 * (sigma_tilde / mu.max()) ** 2
    res = mc_field_extremes(mu, sigma_tilde, T, min(dt, T), N, seed, bridge=bridge, t_min=t_min)
    M = res["max"]
    # mean of int_0^{a0} M/x^2 with E M(x) = s^2/(2 mu(x)), exact in the head
    head = srpt_mean_Zstar_head(spec, a[0])
    Z = head + integrate_field(a, M[:, :-1], g_inf=M[:, -1])
    mean = float(Z.mean())
    var = float(Z.var(ddof=1))
    n = Z.size
    # stderr of the sample variance from the fourth central moment
    m4 = float(np.mean((Z - mean) ** 4))
    se_var = math.sqrt(max(m4 - var * var * (n - 3) / (n - 1), 0.0) / n)
    out = {"mean": mean, "var": var, "se_mean": math.sqrt(var / n), "se_var": se_var,
           "horizon": res["T"], "dt": res["dt"], "head": head, "n": n}
    if return_samples:
        out["samples"] = Z
    return out
