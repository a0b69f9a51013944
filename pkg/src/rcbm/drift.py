"""Drift functions mu(a) and the diffusion coefficient sigma.

A drift is strictly decreasing on (0, inf), blows up at 0+ and tends to
``mu_inf`` at infinity. Three families are provided:

* :class:`SRPTDrift` -- ``kappa + lambda_tilde * a**-p`` (the heavy-tailed SRPT limit),
* :class:`PowerLawDrift` -- ``c0 + c1 * a**-q``,
* :class:`TabulatedDrift` -- monotone piecewise-linear through knots, with
  power-law extrapolation on both sides.

``a = np.inf`` is a valid argument everywhere and returns ``mu_inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import integrate

__all__ = [
    "DriftSpec",
    "SRPTDrift",
    "PowerLawDrift",
    "TabulatedDrift",
    "IntegrabilityResult",
    "mu_at",
    "check_mass_integrability",
    "check_higher_moment_integrability",
    "drift_from_dict",
]

A_MAX = 1.0e6


class DriftSpec:
    """Base class. Subclasses implement :meth:`_mu_finite` for finite ``a > 0``."""

    sigma: float
    mu_inf: float
    kind: str = "abstract"

    def mu(self, a):
        """Vectorised mu(a); ``a`` must be > 0 (``inf`` allowed)."""
        arr = np.asarray(a, dtype=float)
        if np.any(np.isnan(arr)) or np.any(arr <= 0):
            raise ValueError("mu(a) is defined for a > 0 only (a = 0 diverges)")
        fin = np.isfinite(arr)
        out = np.full(arr.shape, float(self.mu_inf))
        if np.any(fin):
            out[fin] = self._mu_finite(arr[fin])
        return float(out) if out.ndim == 0 else out

    def _mu_finite(self, a: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:  # pragma: no cover
        raise NotImplementedError

    def _validate_common(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError("sigma must be a positive finite number")
        if not (self.mu_inf >= 0 and math.isfinite(self.mu_inf)):
            raise ValueError("mu_inf must be a nonnegative finite number")


@dataclass(frozen=True)
class SRPTDrift(DriftSpec):
    """mu(a) = kappa + lambda_tilde * a**(-p), mu(inf) = kappa."""

    kappa: float
    lambda_tilde: float
    p: float
    sigma: float = 1.0
    kind: str = field(default="srpt", init=False)

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.lambda_tilde > 0:
            raise ValueError("lambda_tilde must be positive")
        self._validate_common()

    @property
    def mu_inf(self) -> float:
        return float(self.kappa)

    @property
    def scale(self) -> float:
        """Natural size scale (lambda_tilde / kappa)**(1/p)."""
        return (self.lambda_tilde / self.kappa) ** (1.0 / self.p)

    def _mu_finite(self, a):
        return self.kappa + self.lambda_tilde * a ** (-self.p)

    def to_dict(self):
        return {"kind": "srpt", "sigma": self.sigma, "kappa": self.kappa,
                "lambda_tilde": self.lambda_tilde, "p": self.p}


@dataclass(frozen=True)
class PowerLawDrift(DriftSpec):
    """mu(a) = c0 + c1 * a**(-q), mu(inf) = c0."""

    c0: float
    c1: float
    q: float
    sigma: float = 1.0
    kind: str = field(default="powerlaw", init=False)

    def __post_init__(self):
        if not self.c0 >= 0:
            raise ValueError("c0 must be nonnegative")
        if not self.c1 > 0:
            raise ValueError("c1 must be positive")
        if not self.q > 0:
            raise ValueError("q must be positive")
        self._validate_common()

    @property
    def mu_inf(self) -> float:
        return float(self.c0)

    def _mu_finite(self, a):
        return self.c0 + self.c1 * a ** (-self.q)

    def to_dict(self):
        return {"kind": "powerlaw", "sigma": self.sigma, "c0": self.c0,
                "c1": self.c1, "q": self.q}


@dataclass(frozen=True)
class TabulatedDrift(DriftSpec):
    """Monotone piecewise-linear drift through ``(a_k, mu_k)`` knots.

    Below the first knot the drift is extended as ``mu_1 * (a/a_1)**(-s0)``
    and above the last knot as ``mu_inf + (mu_K - mu_inf) * (a_K/a)**s1``;
    the exponents come from the two outermost knot pairs (falling back to 1).
    """

    a_knots: tuple
    mu_knots: tuple
    mu_inf: float = 0.0
    sigma: float = 1.0
    kind: str = field(default="tabulated", init=False)

    def __post_init__(self):
        a = np.asarray(self.a_knots, dtype=float)
        m = np.asarray(self.mu_knots, dtype=float)
        object.__setattr__(self, "a_knots", tuple(float(v) for v in a))
        object.__setattr__(self, "mu_knots", tuple(float(v) for v in m))
        if a.ndim != 1 or a.size < 2 or a.size != m.size:
            raise ValueError("need at least two (a, mu) knots of equal length")
        if np.any(a <= 0) or np.any(np.diff(a) <= 0) or not np.all(np.isfinite(a)):
            raise ValueError("a knots must be positive, finite and strictly increasing")
        if np.any(np.diff(m) >= 0):
            raise ValueError("mu knots must be strictly decreasing")
        self._validate_common()
        if not m[-1] > self.mu_inf:
            raise ValueError("last mu knot must exceed mu_inf")
        s0 = math.log(m[0] / m[1]) / math.log(a[1] / a[0]) if m[1] > 0 else 1.0
        g0, g1 = m[-2] - self.mu_inf, m[-1] - self.mu_inf
        s1 = math.log(g0 / g1) / math.log(a[-1] / a[-2])
        object.__setattr__(self, "_s0", s0 if s0 > 0 else 1.0)
        object.__setattr__(self, "_s1", s1 if s1 > 0 else 1.0)

    def _mu_finite(self, a):
        ak = np.asarray(self.a_knots)
        mk = np.asarray(self.mu_knots)
        out = np.interp(a, ak, mk)
        lo = a < ak[0]
        hi = a > ak[-1]
        out[lo] = mk[0] * (a[lo] / ak[0]) ** (-self._s0)
        out[hi] = self.mu_inf + (mk[-1] - self.mu_inf) * (ak[-1] / a[hi]) ** self._s1
        return out

    def to_dict(self):
        return {"kind": "tabulated", "sigma": self.sigma, "a_knots": list(self.a_knots),
                "mu_knots": list(self.mu_knots), "mu_inf": self.mu_inf}


def drift_from_dict(d: dict) -> DriftSpec:
    """Build a drift from its serialized form (see ``to_dict``)."""
    d = dict(d)
    kind = d.pop("kind", None)
    known = {"srpt": SRPTDrift, "powerlaw": PowerLawDrift, "tabulated": TabulatedDrift}
    if kind not in known:
        raise ValueError(f"drift.kind must be one of {sorted(known)}, got {kind!r}")
    cls = known[kind]
    try:
        if kind == "tabulated":
            d["a_knots"] = tuple(d["a_knots"])
            d["mu_knots"] = tuple(d["mu_knots"])
        return cls(**d)
    except TypeError as exc:
        raise ValueError(f"drift: {exc}") from None


def mu_at(spec: DriftSpec, a):
    """mu(a) for ``a > 0`` or ``a = inf``; ``a = 0`` raises ``ValueError``."""
    return spec.mu(a)


@dataclass(frozen=True)
class IntegrabilityResult:
    holds: bool
    value: float
    detail: str = ""


def _edge_exponent(f, a1, a2):
    """Log-log slope of a positive integrand between two points."""
    f1, f2 = f(a1), f(a2)
    if not (f1 > 0 and f2 > 0):
        return -np.inf if f2 == 0 else np.inf
    return math.log(f2 / f1) / math.log(a2 / a1)


def _integral_0_to_inf(f, a_lo=1e-12, a_hi=A_MAX, tail_bound=None, cap=1e12):
    """Integrate a positive integrand over (0, inf).

    The body (a_lo, a_hi) is integrated piecewise over decades. The two ends are
    closed with power-law remainders fitted from the integrand's local log-log
    slope; a slope at or beyond -1 means the end diverges. ``tail_bound`` (if
    given) replaces the fitted upper remainder.
    """
    edges = np.logspace(math.log10(a_lo), math.log10(a_hi), int(round(math.log10(a_hi / a_lo))) + 1)
    body = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(f, lo, hi, limit=200, epsrel=1e-12, epsabs=0.0)
        body += val
        if body > cap:
            return IntegrabilityResult(False, math.inf, "partial sums exceed cap")
    beta0 = _edge_exponent(f, a_lo, 10 * a_lo)
    if beta0 <= -1 + 1e-3:
        return IntegrabilityResult(False, math.inf, f"integrand ~ a^{beta0:.3f} at 0")
    head = f(a_lo) * a_lo / (beta0 + 1)
    if tail_bound is not None:
        tail = tail_bound
    else:
        beta1 = _edge_exponent(f, a_hi / 10, a_hi)
        if beta1 >= -1 - 1e-3:
            return IntegrabilityResult(False, math.inf, f"integrand ~ a^{beta1:.3f} at infinity")
        tail = -f(a_hi) * a_hi / (beta1 + 1)
    return IntegrabilityResult(True, body + head + tail)


def check_mass_integrability(spec: DriftSpec) -> IntegrabilityResult:
    """Check that int_0^inf da / (a^2 mu(a)) is finite and report its value.

    Exact for the SRPT family (a Beta integral). Other families use quadrature
    on (1e-12, 1e6] with power-law end corrections, and the bound
    1/(a_max * mu_inf) for the upper tail when ``mu_inf > 0``.
    """
    if isinstance(spec, SRPTDrift):
        p = spec.p
        val = (spec.kappa / spec.lambda_tilde) ** (1.0 / p) / spec.kappa * (math.pi / p) / math.sin(math.pi / p)
        return IntegrabilityResult(True, val, "closed form")

    def f(a):
        return 1.0 / (a * a * float(spec.mu(a)))

    tail = 1.0 / (A_MAX * spec.mu_inf) if spec.mu_inf > 0 else None
    return _integral_0_to_inf(f, tail_bound=tail)


def check_higher_moment_integrability(spec: DriftSpec, gamma: float) -> bool:
    """Whether int_0^1 x^(-2g) mu^(-g) and int_1^inf x^(-g) mu^(-g) are both finite.

    For ``gamma == 1`` this is the mass condition. For the SRPT family the answer
    is closed form: ``p >= 2`` or ``gamma < 1/(2-p)``.
    """
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    if gamma == 1:
        return check_mass_integrability(spec).holds
    if isinstance(spec, SRPTDrift):
        return spec.p >= 2 or gamma < 1.0 / (2.0 - spec.p)

    def f0(x):
        return x ** (-2 * gamma) * float(spec.mu(x)) ** (-gamma)

    def f1(x):
        return x ** (-gamma) * float(spec.mu(x)) ** (-gamma)

    beta0 = _edge_exponent(f0, 1e-12, 1e-11)
    beta1 = _edge_exponent(f1, 1e5, 1e6)
    return bool(beta0 > -1 + 1e-3 and beta1 < -1 - 1e-3)
