"""Joint CDF of the maximum process at n size points.

The event ``{M_*(a_i) <= x_i for all i}`` says that ``sigma*B_s`` stays below
every line ``l_i(s) = nu_i*s + x_i``, i.e. below their lower envelope. After
discarding lines that never touch the envelope, consecutive lines meet at
increasing times ``tau_1 < ... < tau_{n-1}`` and

    F = P(U* <= x_1) - exp(-2 nu_n x_n / sigma^2) P(V* <= x_1),

where ``U`` runs with drift ``-nu_i`` on ``[tau_{i-1}, tau_i)`` up to
``tau_{n-1}`` and ``V`` is ``U`` with ``2 nu_n`` added to every drift. The two
piecewise-drift maximum probabilities are computed by propagating the
sub-density of the killed process across segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import running_max_cdf, stationary_max_cdf_nu, tail_crossing_prob
from .bm_sim import envelope_survival
from .drift import DriftSpec

__all__ = [
    "ConstraintSet",
    "SegmentedDrift",
    "reduce_lines",
    "reduce_constraints",
    "piecewise_max_cdf",
    "joint_cdf_nd",
    "joint_cdf_nd_lines",
    "mc_joint_cdf",
    "mc_envelope_probs",
    "envelope_horizon",
    "lower_envelope",
]

MAX_GRID = 8193
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ConstraintSet:
    """Lines ``nu_i * s + x_i`` ordered by decreasing slope (increasing ``a``)."""

    nus: tuple
    xs: tuple
    a: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "nus", tuple(float(v) for v in self.nus))
        object.__setattr__(self, "xs", tuple(float(v) for v in self.xs))
        if len(self.nus) == 0 or len(self.nus) != len(self.xs):
            raise ValueError("constraint set needs matching, non-empty nu and x lists")
        if any(v < 0 for v in self.nus) or any(v < 0 for v in self.xs):
            raise ValueError("drifts and thresholds must be nonnegative")
        if any(n1 <= n2 for n1, n2 in zip(self.nus, self.nus[1:])):
            raise ValueError("drifts must be strictly decreasing")

    @property
    def n(self) -> int:
        return len(self.nus)

    @property
    def taus(self) -> tuple:
        """Intersection times of consecutive lines."""
        return tuple((x2 - x1) / (n1 - n2) for n1, n2, x1, x2
                     in zip(self.nus, self.nus[1:], self.xs, self.xs[1:]))

    def is_reduced(self) -> bool:
        t = (0.0,) + self.taus
        return all(t1 < t2 for t1, t2 in zip(t, t[1:]))


@dataclass(frozen=True)
class SegmentedDrift:
    """Piecewise-constant drift schedule ``[(duration, drift), ...]`` with a barrier."""

    segments: tuple
    barrier: float
    boost: float = 0.0

    def __post_init__(self):
        segs = tuple((float(d), float(m)) for d, m in self.segments)
        if any(d <= 0 for d, _ in segs):
            raise ValueError("segment durations must be positive")
        if self.barrier < 0:
            raise ValueError("barrier must be nonnegative")
        object.__setattr__(self, "segments", segs)

    @property
    def drifts(self):
        return [m + self.boost for _, m in self.segments]

    @property
    def durations(self):
        return [d for d, _ in self.segments]


def lower_envelope(nus, xs, s):
    """Pointwise minimum of the lines at times ``s``."""
    s = np.asarray(s, dtype=float)
    return np.min(np.outer(s, nus) + np.asarray(xs)[None, :], axis=1)


def reduce_lines(nus, xs):
    """Indices of lines that attain the lower envelope on a set of positive length.

    Lines must be given with strictly decreasing slopes. A line is dropped if a
    later (flatter) line starts no higher, or if it is cut off by its
    neighbours (``tau(prev, line) >= tau(line, next)``); on ties the middle
    line is the one dropped.
    """
    nus = [float(v) for v in nus]
    xs = [float(v) for v in xs]
    n = len(nus)
    if n == 0:
        raise ValueError("empty constraint list")
    # a flatter line that starts no higher dominates
    keep = []
    suffix_min = math.inf
    for i in range(n - 1, -1, -1):
        if xs[i] < suffix_min:
            keep.append(i)
            suffix_min = xs[i]
    keep.reverse()

    def tau(i, j):
        return (xs[j] - xs[i]) / (nus[i] - nus[j])

    stack = []
    for i in keep:
        while len(stack) >= 2 and tau(stack[-2], stack[-1]) >= tau(stack[-1], i):
            stack.pop()
        stack.append(i)
    return stack


def reduce_constraints(raw, spec: DriftSpec):
    """Reduce ``[(a_i, x_i), ...]`` (``a`` strictly increasing) to sequential form.

    Returns
    -------
    (ConstraintSet, removed)
        ``removed`` lists the 0-based indices that were dropped.
    """
    if len(raw) == 0:
        raise ValueError("empty constraint list")
    a = [float(p[0]) for p in raw]
    x = [float(p[1]) for p in raw]
    if any(a2 <= a1 for a1, a2 in zip(a, a[1:])) or a[0] <= 0:
        raise ValueError("size points must be positive and strictly increasing")
    if any(v < 0 for v in x):
        raise ValueError("thresholds must be nonnegative")
    nus = [float(spec.mu(v)) for v in a]
    kept = reduce_lines(nus, x)
    removed = [i for i in range(len(a)) if i not in kept]
    cs = ConstraintSet(tuple(nus[i] for i in kept), tuple(x[i] for i in kept),
                       tuple(a[i] for i in kept))
    return cs, removed


def _log_kernel_terms(y, dist, t, nu, sigma):
    """log of the two Gaussian terms of the killed transition density.

    ``y`` is the displacement, ``dist`` the distance from the start to the
    barrier. Returns ``(log_a, log_b)`` with density ``exp(log_a) - exp(log_b)``.
    """
    sd = sigma * math.sqrt(t)
    log_g = -nu * y / sigma**2 - nu * nu * t / (2.0 * sigma**2) - math.log(sd) - _LOG_SQRT_2PI
    z1 = y / sd
    z2 = (y - 2.0 * dist) / sd
    return log_g - 0.5 * z1 * z1, log_g - 0.5 * z2 * z2


def _transition_matrix(u_to, u_from, barrier, t, nu, sigma):
    y = u_to[:, None] - u_from[None, :]
    dist = barrier - u_from[None, :]
    la, lb = _log_kernel_terms(y, dist, t, nu, sigma)
    # exp(la) - exp(lb) with la >= lb below the barrier
    out = np.exp(la) * -np.expm1(np.minimum(lb - la, 0.0))
    out[:, u_from >= barrier] = 0.0
    return out


def _simpson_weights(n, h):
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


def piecewise_max_cdf(sd: SegmentedDrift, sigma, grid_n=2049):
    """P(sup_{s<=T} U_s <= barrier) for ``U`` with piecewise-constant drift.

    ``U_0 = 0`` and ``dU = drift_k ds + sigma dB`` on segment ``k``. A single
    segment is evaluated in closed form. Otherwise the sub-density of ``U`` on
    ``{no barrier crossing yet}`` is propagated over a uniform grid with
    Simpson weights; the last segment is closed with the running-max CDF.
    The grid is refined automatically so that its spacing resolves the
    shortest segment.
    """
    if grid_n < 64:
        raise ValueError("grid_n must be at least 64")
    b = float(sd.barrier)
    durs = sd.durations
    drifts = sd.drifts
    if len(durs) == 1:
        return running_max_cdf(b, durs[0], -drifts[0], sigma)
    if b == 0:
        return 0.0
    T = sum(durs)
    lo = b - 12.0 * sigma * math.sqrt(T) - sum(abs(m) * d for m, d in zip(drifts, durs))
    n = int(grid_n) | 1
    h_target = sigma * math.sqrt(min(durs[:-1])) / 8.0
    while (b - lo) / (n - 1) > h_target:
        n = 2 * n - 1
        if n > MAX_GRID:
            raise RuntimeError("piecewise_max_cdf: grid needed to resolve the segments "
                               f"exceeds {MAX_GRID} points")
    u = np.linspace(lo, b, n)
    w = _simpson_weights(n, u[1] - u[0])
    # first segment from the point mass at 0
    t0, m0 = durs[0], drifts[0]
    la, lb = _log_kernel_terms(u, b, t0, -m0, sigma)
    p = np.exp(la) * -np.expm1(np.minimum(lb - la, 0.0))
    p[-1] = 0.0
    for t, m in zip(durs[1:-1], drifts[1:-1]):
        K = _transition_matrix(u, u, b, t, -m, sigma)
        p = K @ (w * p)
        p[-1] = 0.0
    surv = running_max_cdf(b - u, durs[-1], -drifts[-1], sigma)
    val = float(np.dot(w * p, surv))
    if p[0] > 1e-8 * max(p.max(), 1e-300):
        raise RuntimeError("piecewise_max_cdf: truncated mass at the left edge is not negligible")
    return min(max(val, 0.0), 1.0)


def joint_cdf_nd_lines(nus, xs, sigma, grid_n=2049):
    """Joint CDF for lines already in sequential (reduced) form."""
    cs = ConstraintSet(nus, xs)
    if not cs.is_reduced():
        raise ValueError("constraints are not in sequential form; reduce them first")
    nus, xs = cs.nus, cs.xs
    nu_n = nus[-1]
    if nu_n == 0:
        return 0.0
    if cs.n == 1:
        return stationary_max_cdf_nu(xs[0], nus[0], sigma)
    taus = (0.0,) + cs.taus
    segs = tuple((taus[i + 1] - taus[i], -nus[i]) for i in range(cs.n - 1))
    pu = piecewise_max_cdf(SegmentedDrift(segs, xs[0]), sigma, grid_n)
    pv = piecewise_max_cdf(SegmentedDrift(segs, xs[0], boost=2.0 * nu_n), sigma, grid_n)
    val = pu - math.exp(-2.0 * nu_n * xs[-1] / sigma**2) * pv
    return min(max(val, 0.0), 1.0)


def joint_cdf_nd(cs: ConstraintSet, spec: DriftSpec | float, grid_n=2049):
    """P(M_*(a_i) <= x_i, i = 1..n) for a reduced constraint set.

    ``spec`` may be a :class:`DriftSpec` (only ``sigma`` is used, drifts come
    from ``cs``) or a bare ``sigma``.
    """
    sigma = spec.sigma if isinstance(spec, DriftSpec) else float(spec)
    return joint_cdf_nd_lines(cs.nus, cs.xs, sigma, grid_n)


def envelope_horizon(nus, xs, sigma, tol):
    """Horizon past the last envelope breakpoint with tail crossing mass below ``tol``."""
    kept = reduce_lines(nus, xs)
    knus = [nus[i] for i in kept]
    kxs = [xs[i] for i in kept]
    last = ConstraintSet(knus, kxs).taus[-1] if len(kept) > 1 else 0.0
    nu_n, x_n = knus[-1], kxs[-1]
    if not nu_n > 0:
        raise ValueError("the flattest line must have positive slope")
    H = max(last, sigma**2 / nu_n**2)
    while tail_crossing_prob(x_n, H, nu_n, sigma) >= tol:
        H *= 1.25
    return H


def mc_envelope_probs(line_sets, sigma, n, dt, seed, horizon=None):
    """Monte Carlo probabilities that ``sigma*B`` stays below each envelope.

    All sets share the same paths. The horizon defaults to the smallest value
    at which every set's residual crossing mass is below ``0.1 / (2 sqrt(n))``,
    a tenth of the largest possible binomial stderr.

    Returns
    -------
    (estimates, stderrs, weights, horizon)
        ``weights`` is the ``(n, C)`` matrix of per-path conditional survival
        probabilities, for building derived estimators.
    """
    tol = 0.1 * 0.5 / math.sqrt(n)
    if horizon is None:
        horizon = max(envelope_horizon(nu, x, sigma, tol) for nu, x in line_sets)
    cells = [(list(zip(nu, x)), 0.0, math.inf) for nu, x in line_sets]
    W = envelope_survival(cells, sigma, horizon, min(dt, horizon), n, seed)
    est = W.mean(axis=0)
    se = W.std(axis=0, ddof=1) / math.sqrt(n)
    return est, se, W, horizon


def mc_joint_cdf(raw, spec: DriftSpec, N, dt, seed):
    """Truncated-horizon Monte Carlo of the joint CDF for raw ``[(a_i, x_i)]``.

    The path is monitored against the envelope with exact Brownian-bridge
    crossing probabilities, so the estimator has no time-discretization bias;
    the only bias is the tail beyond the horizon, held below a tenth of the
    stderr.
    """
    nus = [float(spec.mu(p[0])) for p in raw]
    xs = [float(p[1]) for p in raw]
    est, se, _, H = mc_envelope_probs([(nus, xs)], spec.sigma, N, dt, seed)
    return {"estimate": float(est[0]), "stderr": float(se[0]), "horizon": H}
