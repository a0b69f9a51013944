"""Closed-form laws of the maximum process.

For a drift ``nu`` and diffusion ``sigma``, ``M_t = sup_{s<=t} (sigma*B_s - nu*s)``.
Everything here is a pure function of its arguments. Functions taking
``(a, spec)`` resolve the drift through :class:`rcbm.drift.DriftSpec`; the
``*_nu`` variants take drifts directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import gamma as _gamma
from scipy.special import log_ndtr, ndtr

from .drift import DriftSpec
from .special import std_normal_pdf

__all__ = [
    "TwoPoint",
    "running_max_cdf",
    "stationary_max_cdf",
    "stationary_max_cdf_nu",
    "joint_cdf_2d",
    "joint_cdf_2d_nu",
    "conditional_max_cdf",
    "joint_density_g",
    "joint_density_h",
    "g_moments",
    "kernel_f",
    "covariance",
    "covariance_nu",
    "increment_covariance_nu",
    "correlation",
    "correlation_nu",
    "stationary_max_moment",
    "stationary_max_moment_nu",
    "horizon_for_gap",
    "tail_crossing_prob",
]


def _scalar_or_array(out):
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def running_max_cdf(x, t, nu, sigma):
    """P(sup_{s<=t} (sigma*B_s - nu*s) <= x).

    Valid for every real ``nu``. ``t = 0`` gives 1 (for ``x >= 0``) and
    ``t = inf`` gives the stationary limit, which is ``1 - exp(-2 nu x / sigma^2)``
    for ``nu > 0`` and 0 otherwise. The exponential term is combined in log
    space so that large ``|nu| x`` neither overflows nor cancels badly.
    """
    x, t, nu = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, t, nu)))
    if np.any(np.isnan(x)) or np.any(x < 0):
        raise ValueError("running_max_cdf requires x >= 0")
    if np.any(t < 0):
        raise ValueError("running_max_cdf requires t >= 0")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    s2 = sigma * sigma
    out = np.ones(x.shape)

    inf_t = np.isinf(t)
    if np.any(inf_t):
        xi, ni = x[inf_t], nu[inf_t]
        val = np.where(ni > 0, -np.expm1(-2.0 * np.maximum(ni, 0.0) * xi / s2), 0.0)
        val = np.where(np.isinf(xi), 1.0, val)
        out[inf_t] = val

    mid = (t > 0) & ~inf_t
    if np.any(mid):
        xm, tm, nm = x[mid], t[mid], nu[mid]
        sd = sigma * np.sqrt(tm)
        with np.errstate(invalid="ignore", over="ignore"):
            first = ndtr((xm + nm * tm) / sd)
            log_second = -2.0 * nm * xm / s2 + log_ndtr((-xm + nm * tm) / sd)
            second = np.exp(log_second)
        val = np.where(np.isinf(xm), 1.0, first - second)
        out[mid] = np.clip(val, 0.0, 1.0)
    return _scalar_or_array(out)


def tail_crossing_prob(x, horizon, nu, sigma):
    """P(sigma*B_s - nu*s exceeds x for some s > horizon), for ``nu > 0``.

    This is the mass lost by stopping a path at ``horizon`` when estimating
    the all-time maximum, i.e. ``rmcdf(x, horizon) - stationary_cdf(x)``.
    """
    if not nu > 0:
        raise ValueError("tail bound needs nu > 0")
    if horizon == 0:
        return float(np.exp(-2.0 * nu * x / sigma**2))
    sd = sigma * math.sqrt(horizon)
    up = -2.0 * nu * x / sigma**2 + float(log_ndtr((x - nu * horizon) / sd))
    down = float(log_ndtr(-(x + nu * horizon) / sd))
    return max(math.exp(up) - math.exp(down), 0.0)


def stationary_max_cdf_nu(x, nu, sigma):
    """CDF of Exp(2 nu / sigma^2); identically 0 when ``nu == 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be >= 0")
    if nu < 0:
        raise ValueError("nu must be >= 0")
    if nu == 0:
        return _scalar_or_array(np.zeros(x.shape))
    return _scalar_or_array(-np.expm1(-2.0 * nu * x / sigma**2))


def stationary_max_cdf(x, a, spec: DriftSpec):
    """P(M_*(a) <= x) = 1 - exp(-2 mu(a) x / sigma^2)."""
    return stationary_max_cdf_nu(x, spec.mu(a), spec.sigma)


@dataclass(frozen=True)
class TwoPoint:
    """Two size points ``a1 < a2`` (``a2`` may be ``inf``) and thresholds."""

    a1: float
    a2: float
    x1: float
    x2: float

    def __post_init__(self):
        if not (0 < self.a1 < self.a2):
            raise ValueError("need 0 < a1 < a2")
        if self.x1 < 0 or self.x2 < 0:
            raise ValueError("thresholds must be nonnegative")

    def drifts(self, spec: DriftSpec) -> tuple[float, float]:
        return float(spec.mu(self.a1)), float(spec.mu(self.a2))

    def tau1(self, spec: DriftSpec) -> float:
        nu1, nu2 = self.drifts(spec)
        return (self.x2 - self.x1) / (nu1 - nu2)


def joint_cdf_2d_nu(x1, x2, nu1, nu2, sigma):
    """P(M_*(a1) <= x1, M_*(a2) <= x2) given the drifts ``nu1 > nu2 >= 0``."""
    if not nu1 > nu2 >= 0:
        raise ValueError("need nu1 > nu2 >= 0")
    if x1 < 0 or x2 < 0:
        raise ValueError("thresholds must be nonnegative")
    if nu2 == 0:
        return 0.0
    if x2 <= x1:
        return stationary_max_cdf_nu(x2, nu2, sigma)
    tau1 = (x2 - x1) / (nu1 - nu2)
    u = running_max_cdf(x1, tau1, nu1, sigma)
    v = running_max_cdf(x1, tau1, nu1 - 2.0 * nu2, sigma)
    val = u - math.exp(-2.0 * nu2 * x2 / sigma**2) * v
    return min(max(val, 0.0), 1.0)


def joint_cdf_2d(tp: TwoPoint, spec: DriftSpec) -> float:
    """Joint CDF of (M_*(a1), M_*(a2)) at (x1, x2)."""
    nu1, nu2 = tp.drifts(spec)
    return joint_cdf_2d_nu(tp.x1, tp.x2, nu1, nu2, spec.sigma)


def conditional_max_cdf(x1, x2, nu1, nu2, sigma):
    """P(M_{tau1}(a1) <= x1 | M_*(a2) > x2) for ``x1 < x2``.

    Conditioning the line-2 crossing to happen pushes the path up by twice the
    line-2 drift before ``tau1``; the answer is the running-max CDF at drift
    ``nu1 - 2 nu2``.
    """
    if not x2 > x1:
        raise ValueError("need x2 > x1")
    tau1 = (x2 - x1) / (nu1 - nu2)
    return running_max_cdf(x1, tau1, nu1 - 2.0 * nu2, sigma)


def joint_density_g(x, z, nu1, delta1, sigma):
    """Joint density of ``(M_*(a1), M_*(a2) - M_*(a1))`` with ``delta1 = nu1 - nu2``.

    Zero outside the open quadrant ``x > 0, z > 0``.
    """
    if not (0 < delta1 < nu1):
        raise ValueError("need 0 < delta1 < nu1")
    x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
    out = np.zeros(x.shape)
    ok = (x > 0) & (z > 0)
    if np.any(ok):
        xx, zz = x[ok], z[ok]
        nu2 = nu1 - delta1
        root = sigma * np.sqrt(delta1 * zz)
        t1 = (std_normal_pdf((xx * delta1 + nu1 * zz) / root)
              * 2.0 * nu2 * math.sqrt(delta1) * (xx + 2.0 * zz) / (sigma**3 * zz**1.5))
        # exp * Phi in log space: the Phi argument runs far negative for large z
        log_t2 = ((-2.0 * delta1 * xx - 2.0 * nu2 * zz) / sigma**2
                  + log_ndtr((-xx * delta1 - (nu1 - 2.0 * delta1) * zz) / root))
        t2 = 4.0 * nu2 * (2.0 * delta1 - nu1) / sigma**4 * np.exp(log_t2)
        out[ok] = t1 + t2
    return _scalar_or_array(out)


def joint_density_h(x1, x2, nu1, nu2, sigma):
    """Joint density of ``(M_*(a1), M_*(a2))``: ``g(x1, x2 - x1)``."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return joint_density_g(x1, x2 - x1, nu1, nu1 - nu2, sigma)


def g_moments(nu1, delta1, sigma, epsabs=1e-10, epsrel=1e-9):
    """Integrals of ``g`` and ``x*z*g`` over the positive quadrant.

    Both axes are mapped to (0, 1) by ``x = -s log(u)`` with ``s`` the natural
    decay length of that axis, so the exponential tails become bounded.

    Returns
    -------
    (mass, xz_moment)
    """
    nu2 = nu1 - delta1
    sx = sigma**2 / (2.0 * delta1)
    sz = sigma**2 / (2.0 * nu2)

    def outer(weight):
        def inner_integrand(v, u):
            x = -sx * math.log(u)
            z = -sz * math.log(v)
            jac = sx * sz / (u * v)
            return weight(x, z) * float(joint_density_g(x, z, nu1, delta1, sigma)) * jac

        val, _ = integrate.dblquad(inner_integrand, 0.0, 1.0, 0.0, 1.0,
                                   epsabs=epsabs, epsrel=epsrel)
        return val

    mass = outer(lambda x, z: 1.0)
    xz = outer(lambda x, z: x * z)
    return mass, xz


def kernel_f(u, x, t, nu, sigma):
    """Sub-density of ``X_t = sigma*B_t - nu*t`` at ``u`` on ``{sup_{s<=t} X_s <= x}``.

    Defined for ``u <= x``, ``x >= 0``, ``t > 0``; zero above the barrier.
    """
    u = np.asarray(u, dtype=float)
    sd = sigma * math.sqrt(t)
    girsanov = np.exp(-nu * u / sigma**2 - nu * nu * t / (2.0 * sigma**2))
    refl = std_normal_pdf(u / sd) - std_normal_pdf((u - 2.0 * x) / sd)
    out = np.where(u <= x, girsanov * refl / sd, 0.0)
    return _scalar_or_array(out)


def covariance_nu(nu1, nu2, sigma):
    """Cov(M_*(a1), M_*(a2)) for drifts ``nu1 >= nu2 > 0``."""
    if not nu2 > 0:
        raise ValueError("covariance needs mu(a2) > 0")
    if nu2 > nu1:
        raise ValueError("need nu1 >= nu2")
    return sigma**4 / (4.0 * nu1**2) * (2.0 - nu2 / nu1)


def increment_covariance_nu(nu1, nu2, sigma):
    """Cov(M_*(a1), M_*(a2) - M_*(a1)) = Cov - Var(M_*(a1))."""
    return sigma**4 / (4.0 * nu1**2) * (1.0 - nu2 / nu1)


def covariance(a1, a2, spec: DriftSpec) -> float:
    """Cov(M_*(a1), M_*(a2)) for ``a1 <= a2``."""
    if a2 < a1:
        raise ValueError("need a1 <= a2")
    return covariance_nu(float(spec.mu(a1)), float(spec.mu(a2)), spec.sigma)


def correlation_nu(nu1, nu2):
    """Correlation ``r (2 - r)`` with ``r = nu2 / nu1``."""
    if not nu2 > 0:
        raise ValueError("correlation needs mu(a2) > 0")
    r = nu2 / nu1
    return r * (2.0 - r)


def correlation(a1, a2, spec: DriftSpec) -> float:
    if a2 < a1:
        raise ValueError("need a1 <= a2")
    return correlation_nu(float(spec.mu(a1)), float(spec.mu(a2)))


def stationary_max_moment_nu(nu, gamma, sigma):
    """E[M^gamma] for M ~ Exp(2 nu / sigma^2)."""
    if not nu > 0:
        raise ValueError("moment needs mu(a) > 0")
    return float(_gamma(gamma + 1.0) * (sigma**2 / (2.0 * nu)) ** gamma)


def stationary_max_moment(a, gamma, spec: DriftSpec) -> float:
    """E[M_*(a)^gamma] = Gamma(gamma+1) sigma^(2 gamma) / (2 mu(a))^gamma."""
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    return stationary_max_moment_nu(float(spec.mu(a)), gamma, spec.sigma)


# Quantile levels used when scanning sup_x |F_T(x) - F_inf(x)|.
_Q_LEVELS = np.concatenate([np.linspace(1e-4, 0.99, 400), 1.0 - np.logspace(-2, -9, 60)])


def _cdf_gap(t_scaled):
    # Dimensionless: nu = sigma = 1 after rescaling time by sigma^2/nu^2.
    xs = -0.5 * np.log1p(-_Q_LEVELS)

    def diff(x):
        return running_max_cdf(x, t_scaled, 1.0, 1.0) + np.expm1(-2.0 * x)

    vals = diff(xs)
    k = int(np.argmax(vals))
    lo = xs[max(k - 1, 0)]
    hi = xs[min(k + 1, len(xs) - 1)]
    res = optimize.minimize_scalar(lambda x: -diff(x), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    return float(max(vals[k], -res.fun))


def horizon_for_gap(nu, sigma, gap):
    """Smallest horizon T with sup_x |P(M_T <= x) - P(M_* <= x)| < gap.

    The gap is monotone in T, and in the units ``t * nu^2 / sigma^2`` it does not
    depend on the parameters, so one bisection on log T suffices.
    """
    if not nu > 0:
        raise ValueError("a finite horizon needs nu > 0 (the all-time maximum is infinite otherwise)")
    if not 0 < gap < 1:
        raise ValueError("gap must lie in (0, 1)")
    lo, hi = 1e-8, 1.0
    while _cdf_gap(hi) >= gap:
        hi *= 2.0
        if hi > 1e8:
            raise RuntimeError("horizon search did not converge")
    for _ in range(80):
        mid = math.sqrt(lo * hi)
        if _cdf_gap(mid) >= gap:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1 + 1e-10:
            break
    return hi * sigma**2 / nu**2
