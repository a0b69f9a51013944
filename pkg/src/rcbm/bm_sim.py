"""Monte Carlo for coupled Brownian motions driven by one noise.

Every size point ``a`` sees the same Brownian path ``B``:

    chi_t(a) = w(a) + sigma*B_t - mu(a)*t,    W_t(a) = Psi[chi(a)](t),

with ``Psi[f](t) = f(t) - min(0, inf_{s<=t} f(s))``. Paths are simulated on a
time grid. Between grid points the path is a Brownian bridge, and its maximum,
minimum and linear-barrier crossing probability have closed forms; using them
("bridge correction") removes the discretization bias of grid maxima exactly
for each marginal.

Random numbers come from ``stream_rng(seed, chunk, stream)``: each fixed-size
chunk of replicates owns an independent PCG64 stream, so output depends only on
the master seed and the run parameters, never on how many worker threads
processed the chunks (see :func:`set_threads`).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .analytic import horizon_for_gap
from .drift import DriftSpec

__all__ = [
    "InitialCondition",
    "PathField",
    "stream_rng",
    "skorokhod_reflect",
    "sample_field",
    "mc_field_extremes",
    "sample_stationary_max",
    "mc_reflected",
    "envelope_survival",
    "mc_first_passage",
    "detect_coupling_time",
    "mc_recurrence_check",
    "EXCEEDED",
    "set_threads",
]

CHUNK = 2048
BLOCK = 256
EXCEEDED = "exceeded"


def stream_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``."""
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(key))))


@dataclass(frozen=True)
class InitialCondition:
    """Deterministic initial field ``w(a)``.

    ``kind`` is ``"zero"``, ``"ramp"`` (``w(a) = c (1 - exp(-a/scale))``) or
    ``"tabulated"`` (piecewise linear through ``(0, 0)`` and the knots, constant
    beyond the last knot).
    """

    kind: str = "zero"
    c: float = 0.0
    scale: float = 1.0
    a_knots: tuple = ()
    w_knots: tuple = ()

    def __post_init__(self):
        if self.kind not in ("zero", "ramp", "tabulated"):
            raise ValueError(f"unknown initial condition kind {self.kind!r}")
        if self.kind == "ramp" and not (self.c >= 0 and self.scale > 0):
            raise ValueError("ramp needs c >= 0 and scale > 0")
        if self.kind == "tabulated":
            a = np.asarray(self.a_knots, float)
            w = np.asarray(self.w_knots, float)
            if a.size == 0 or a.size != w.size or np.any(a <= 0) or np.any(np.diff(a) <= 0):
                raise ValueError("tabulated init needs increasing positive a knots")
            if np.any(w < 0) or np.any(np.diff(w) < 0):
                raise ValueError("tabulated init must be nonnegative and nondecreasing")
            object.__setattr__(self, "a_knots", tuple(map(float, a)))
            object.__setattr__(self, "w_knots", tuple(map(float, w)))

    @property
    def w_inf(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "ramp":
            return float(self.c)
        return float(self.w_knots[-1])

    def w(self, a):
        a = np.asarray(a, dtype=float)
        if self.kind == "zero":
            out = np.zeros(a.shape)
        elif self.kind == "ramp":
            out = np.where(np.isinf(a), self.c, -self.c * np.expm1(-a / self.scale))
        else:
            out = np.interp(a, (0.0,) + self.a_knots, (0.0,) + self.w_knots)
        return float(out) if out.ndim == 0 else out

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "ramp":
            d.update(c=self.c, scale=self.scale)
        elif self.kind == "tabulated":
            d.update(a_knots=list(self.a_knots), w_knots=list(self.w_knots))
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("a_knots", "w_knots"):
            if k in d:
                d[k] = tuple(d[k])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ValueError(f"init: {exc}") from None


def skorokhod_reflect(path):
    """Discrete Skorokhod map ``out[k] = path[k] - min(0, min_{j<=k} path[j])``."""
    path = np.asarray(path, dtype=float)
    if path.size == 0:
        raise ValueError("path must be non-empty")
    if path[0] < 0:
        raise ValueError("path must start at a nonnegative value")
    return path - np.minimum(0.0, np.minimum.accumulate(path, axis=0))


@dataclass
class PathField:
    """Sampled field on a (time x size) grid.

    ``chi`` and ``w_field`` have shape ``(len(t_grid), len(a_grid))``; ``noise``
    holds the standard normal increments used for each step.
    """

    a_grid: np.ndarray
    t_grid: np.ndarray
    noise: np.ndarray
    chi: np.ndarray
    w_field: np.ndarray
    dt: float
    meta: dict = field(default_factory=dict)

    def csv_rows(self):
        """Yield ``(t, a, chi, w)`` rows in time-major order."""
        for k, t in enumerate(self.t_grid):
            for j, a in enumerate(self.a_grid):
                yield t, a, self.chi[k, j], self.w_field[k, j]


def _grid_steps(T, dt):
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not T > 0 or dt > T:
        raise ValueError("need 0 < dt <= T")
    n = int(math.ceil(T / dt - 1e-9))
    return n, T / n


def sample_field(spec: DriftSpec, init: InitialCondition, a_grid, T, dt, seed,
                 zero_noise=False, include_inf=False) -> PathField:
    """Euler sample of one coupled field with the discrete Skorokhod map.

    ``include_inf`` appends the ``a = inf`` column (``mu_inf``, ``w_inf``).
    ``zero_noise`` is a debug hook that replaces all increments by 0.
    """
    a = np.asarray(a_grid, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("a_grid must be a non-empty 1-d sequence")
    if np.any(a <= 0) or np.any(np.diff(a) <= 0):
        raise ValueError("a_grid must be positive and strictly increasing")
    if include_inf and np.isfinite(a[-1]):
        a = np.append(a, np.inf)
    n, h = _grid_steps(T, dt)
    t = np.arange(n + 1) * h
    if zero_noise:
        z = np.zeros(n)
    else:
        z = stream_rng(seed, 0, 0).standard_normal(n)
    b = np.concatenate([[0.0], np.cumsum(spec.sigma * math.sqrt(h) * z)])
    mu = np.asarray(spec.mu(a), dtype=float).reshape(-1)
    w0 = np.asarray(init.w(a), dtype=float).reshape(-1)
    chi = w0[None, :] + b[:, None] - mu[None, :] * t[:, None]
    wf = chi - np.minimum(0.0, np.minimum.accumulate(chi, axis=0))
    return PathField(a, t, z, chi, wf, h, {"seed": seed, "T": T, "zero_noise": zero_noise})


# ---------------------------------------------------------------- kernels

@nb.njit(cache=True, nogil=True)
def _extremes_block(z, u, k0, times, sigma, mu, w, bpos, mx, mn, track_max, track_min, bridge):
    # z, u: (P, B); bpos: (P,) current sigma*B; mx, mn: (P, J) running extremes
    P, B = z.shape
    J = mu.shape[0]
    for i in range(P):
        b0 = bpos[i]
        for k in range(B):
            t0 = times[k0 + k]
            h = times[k0 + k + 1] - t0
            db = sigma * math.sqrt(h) * z[i, k]
            b1 = b0 + db
            lu = math.log(u[i, k]) if bridge else 0.0
            s2h2 = 2.0 * sigma * sigma * h
            for j in range(J):
                y0 = w[j] + b0 - mu[j] * t0
                y1 = y0 + db - mu[j] * h
                if bridge:
                    d = y1 - y0
                    r = math.sqrt(d * d - s2h2 * lu)
                    if track_max:
                        m = 0.5 * (y0 + y1 + r)
                        if m > mx[i, j]:
                            mx[i, j] = m
                    if track_min:
                        m = 0.5 * (y0 + y1 - r)
                        if m < mn[i, j]:
                            mn[i, j] = m
                else:
                    if y1 > mx[i, j]:
                        mx[i, j] = y1
                    if y1 < mn[i, j]:
                        mn[i, j] = y1
            b0 = b1
        bpos[i] = b0


@nb.njit(cache=True, nogil=True)
def _survival_block(z, k0, times, sigma, slopes, icepts, nlines, t_lo, t_hi, bpos, surv):
    # Envelope of cell c: min_l (slopes[c,l]*t + icepts[c,l]); applied on [t_lo[c], t_hi[c]].
    P, B = z.shape
    C = slopes.shape[0]
    s2 = sigma * sigma
    for i in range(P):
        b0 = bpos[i]
        for k in range(B):
            ta = times[k0 + k]
            tb = times[k0 + k + 1]
            h = tb - ta
            b1 = b0 + sigma * math.sqrt(h) * z[i, k]
            for c in range(C):
                if surv[i, c] == 0.0 or ta < t_lo[c] or tb > t_hi[c]:
                    continue
                ea = 1e300
                eb = 1e300
                for l in range(nlines[c]):
                    va = slopes[c, l] * ta + icepts[c, l]
                    vb = slopes[c, l] * tb + icepts[c, l]
                    if va < ea:
                        ea = va
                    if vb < eb:
                        eb = vb
                ga = ea - b0
                gb = eb - b1
                if ga <= 0.0 or gb <= 0.0:
                    surv[i, c] = 0.0
                else:
                    e = 2.0 * ga * gb / (s2 * h)
                    if e < 50.0:
                        surv[i, c] *= -math.expm1(-e)
            b0 = b1
        bpos[i] = b0


@nb.njit(cache=True, nogil=True)
def _passage_block(z, u, k0, h, sigma, level0, drift, bpos, hit):
    # First grid time at which level0 + sigma*B_t - drift*t reaches 0, bridge-checked.
    P, B = z.shape
    sq = sigma * math.sqrt(h)
    s2h = sigma * sigma * h
    for i in range(P):
        if hit[i] >= 0.0:
            continue
        b0 = bpos[i]
        for k in range(B):
            t0 = (k0 + k) * h
            b1 = b0 + sq * z[i, k]
            g0 = level0 + b0 - drift * t0
            g1 = level0 + b1 - drift * (t0 + h)
            if g1 <= 0.0 or (g0 > 0.0 and u[i, k] < math.exp(-2.0 * g0 * g1 / s2h)):
                hit[i] = t0 + h
                break
            b0 = b1
        bpos[i] = b0


# ---------------------------------------------------------------- drivers

_THREADS = 1


def set_threads(n: int) -> None:
    """Number of worker threads used to process replicate chunks."""
    global _THREADS
    if n < 1:
        raise ValueError("need at least one thread")
    _THREADS = int(n)


def _chunks(n):
    for c, start in enumerate(range(0, n, CHUNK)):
        yield c, start, min(CHUNK, n - start)


def _run_chunks(fn, n):
    """Call ``fn(chunk, start, size)`` for every chunk; kernels release the GIL."""
    jobs = list(_chunks(n))
    if _THREADS == 1 or len(jobs) == 1:
        for job in jobs:
            fn(*job)
        return
    with ThreadPoolExecutor(max_workers=_THREADS) as pool:
        for f in [pool.submit(fn, *job) for job in jobs]:
            f.result()


def mc_field_extremes(mu, sigma, T, dt, n, seed, w=None, bridge=True,
                      track_max=True, track_min=False, t_min=None):
    """Maxima and/or minima over ``[0, T]`` of ``w_j + sigma*B_t - mu_j*t`` on shared paths.

    Parameters
    ----------
    mu : array of drifts, one per size point (``mu_inf`` for ``a = inf``).
    w : initial values, default zeros.
    bridge : sample the within-step extremum from the Brownian-bridge law
        (one uniform per step shared by all size points). Each marginal is then
        exact; the joint law across size points is exact only at grid times.
    t_min : if given, the first uniform step is replaced by geometrically
        growing steps ``t_min, 2 t_min, ...`` so that size points with very
        large drift (whose maximum is attained almost immediately) are
        resolved by their own steps rather than sharing one.

    Returns
    -------
    dict with ``max`` and/or ``min`` arrays of shape ``(n, J)``, and ``final``
    (the values at ``T``).
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    w = np.zeros_like(mu) if w is None else np.atleast_1d(np.asarray(w, dtype=float))
    K, h = _grid_steps(T, dt)
    times = np.arange(K + 1) * h
    if t_min is not None and 0 < t_min < h:
        head = t_min * 2.0 ** np.arange(int(math.log2(h / t_min)) + 1)
        times = np.concatenate([[0.0], head[head < h], times[1:]])
        K = times.size - 1
    J = mu.size
    mx = np.empty((n, J))
    mn = np.empty((n, J))
    fin = np.empty((n, J))
    dummy = np.empty((1, 1))
    def chunk(c, s, m):
        rng = stream_rng(seed, c, 0)
        bpos = np.zeros(m)
        cmx = np.tile(w, (m, 1))
        cmn = np.tile(w, (m, 1))
        for k0 in range(0, K, BLOCK):
            nb_ = min(BLOCK, K - k0)
            z = rng.standard_normal((m, nb_))
            u = 1.0 - rng.random((m, nb_)) if bridge else dummy  # in (0, 1]
            _extremes_block(z, u, k0, times, sigma, mu, w, bpos, cmx, cmn,
                            track_max, track_min, bridge)
        mx[s:s + m] = cmx
        mn[s:s + m] = cmn
        fin[s:s + m] = w[None, :] + bpos[:, None] - mu[None, :] * times[-1]

    _run_chunks(chunk, n)
    out = {"final": fin, "T": times[-1], "dt": h, "n_steps": K}
    if track_max:
        out["max"] = mx
    if track_min:
        out["min"] = mn
    return out


def sample_stationary_max(spec: DriftSpec, a, cdf_gap, dt, seed, n=None, bridge=True):
    """Approximate draws of ``M_*(a) = sup_t X_t(a)``.

    The path is run to the horizon ``T*`` at which the running-max law is within
    ``cdf_gap`` (sup norm) of the stationary exponential law, so each draw is
    stochastically dominated by ``M_*(a)``. Returns a float when ``n`` is None.
    """
    nu = float(spec.mu(a))
    if not nu > 0:
        raise ValueError("mu(a) = 0: the all-time maximum is infinite")
    T = horizon_for_gap(nu, spec.sigma, cdf_gap)
    res = mc_field_extremes([nu], spec.sigma, T, min(dt, T), 1 if n is None else n, seed, bridge=bridge)
    out = res["max"][:, 0]
    return float(out[0]) if n is None else out


def mc_reflected(mu, sigma, t, dt, n, seed, w=None, bridge=True):
    """Samples of ``W_t = Psi[chi](t)`` for each drift in ``mu`` (shared paths).

    ``W_t = chi_t - min(0, inf_{s<=t} chi_s)``; with ``bridge`` the infimum is
    that of the continuous path, so each marginal is exact in law.
    Returns an array of shape ``(n, J)``.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    w0 = np.zeros_like(mu) if w is None else np.atleast_1d(np.asarray(w, dtype=float))
    if t == 0:
        return np.tile(w0, (n, 1))
    res = mc_field_extremes(mu, sigma, t, min(dt, t), n, seed, w=w0, bridge=bridge,
                            track_max=False, track_min=True)
    return res["final"] - np.minimum(0.0, res["min"])


def envelope_survival(cells, sigma, T, dt, n, seed, extra_times=()):
    """Bridge-exact survival weights below piecewise-linear envelopes.

    Each cell is ``(lines, t_lo, t_hi)`` with ``lines`` a list of
    ``(slope, intercept)``. For every path the weight of a cell is
    ``P(sigma*B_s < min_l(slope_l*s + icept_l) for s in [t_lo, t_hi] | skeleton)``,
    computed as a product of per-step bridge non-crossing probabilities. The
    time grid is the uniform ``dt`` grid on ``[0, T]`` merged with every line
    intersection and window end, so the barrier is linear within each step
    and the weights are exact conditional probabilities.

    Returns an ``(n, C)`` array whose column means are unbiased for the
    corresponding event probabilities (up to the horizon ``T``).
    """
    C = len(cells)
    L = max(len(c[0]) for c in cells)
    slopes = np.zeros((C, L))
    icepts = np.zeros((C, L))
    nlines = np.zeros(C, dtype=np.int64)
    t_lo = np.zeros(C)
    t_hi = np.zeros(C)
    breaks = {0.0, float(T)}
    breaks.update(float(v) for v in extra_times if 0 < v < T)
    for c, (lines, lo, hi) in enumerate(cells):
        nlines[c] = len(lines)
        t_lo[c], t_hi[c] = lo, min(hi, T)
        for l, (s, b) in enumerate(lines):
            slopes[c, l], icepts[c, l] = s, b
        for v in (lo, hi):
            if 0 < v < T:
                breaks.add(float(v))
        for l1 in range(len(lines)):
            for l2 in range(l1 + 1, len(lines)):
                ds = lines[l1][0] - lines[l2][0]
                if ds != 0:
                    tx = (lines[l2][1] - lines[l1][1]) / ds
                    if 0 < tx < T:
                        breaks.add(float(tx))
    K, h = _grid_steps(T, dt)
    times = np.union1d(np.arange(K + 1) * h, np.array(sorted(breaks)))
    times = times[np.concatenate([[True], np.diff(times) > 1e-12])]
    times[-1] = max(times[-1], T)
    # window ends must be grid points exactly
    for arr in (t_lo, t_hi):
        for c in range(C):
            arr[c] = times[np.argmin(np.abs(times - arr[c]))]
    nsteps = times.size - 1
    out = np.empty((n, C))
    def chunk(ch, s, m):
        rng = stream_rng(seed, ch, 1)
        bpos = np.zeros(m)
        surv = np.ones((m, C))
        for k0 in range(0, nsteps, BLOCK):
            nb_ = min(BLOCK, nsteps - k0)
            z = rng.standard_normal((m, nb_))
            _survival_block(z, k0, times, sigma, slopes, icepts, nlines, t_lo, t_hi, bpos, surv)
        out[s:s + m] = surv

    _run_chunks(chunk, n)
    return out


def mc_first_passage(level0, drift, sigma, dt, t_cap, n, seed):
    """First-passage times of ``level0 + sigma*B_t - drift*t`` to 0 (``inf`` past ``t_cap``).

    Crossings inside a step are detected with the bridge crossing probability;
    the reported time is the right end of that step.
    """
    if level0 <= 0:
        return np.zeros(n)
    K, h = _grid_steps(t_cap, dt)
    out = np.empty(n)
    def chunk(ch, s, m):
        rng = stream_rng(seed, ch, 2)
        bpos = np.zeros(m)
        hit = np.full(m, -1.0)
        for k0 in range(0, K, BLOCK):
            nb_ = min(BLOCK, K - k0)
            z = rng.standard_normal((m, nb_))
            u = rng.random((m, nb_))
            _passage_block(z, u, k0, h, sigma, level0, drift, bpos, hit)
            if np.all(hit >= 0):
                break
        out[s:s + m] = np.where(hit >= 0, hit, np.inf)

    _run_chunks(chunk, n)
    return out


def detect_coupling_time(spec: DriftSpec, init: InitialCondition, dt, seed, t_cap, n=None):
    """Time at which the field started from ``init`` merges with the zero-started one.

    This is the first zero of ``chi_t(inf) = w_inf + sigma*B_t - mu_inf*t``.
    Returns ``EXCEEDED`` (scalar call) or ``inf`` (vector call) past ``t_cap``.
    """
    times = mc_first_passage(init.w_inf, spec.mu_inf, spec.sigma, dt, t_cap,
                             1 if n is None else n, seed)
    if n is None:
        return EXCEEDED if math.isinf(times[0]) else float(times[0])
    return times


def mc_recurrence_check(spec: DriftSpec, init: InitialCondition, T, dt, n_paths, seed):
    """Fraction of paths on which ``sup_a W_t(a) = 0`` for some ``t <= T``.

    ``W_t(.)`` is nondecreasing in ``a``, so its supremum is ``W_t(inf)``, which is
    zero exactly when ``chi(inf)`` reaches a new minimum at or below 0.
    """
    times = mc_first_passage(init.w_inf, spec.mu_inf, spec.sigma, dt, T, n_paths, seed)
    return float(np.mean(times <= T))
