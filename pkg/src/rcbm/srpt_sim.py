"""Discrete-event preemptive SRPT queue with Pareto service times.

The simulator runs in unscaled time. Snapshots are reported under the
distribution-dependent heavy-traffic scaling: time is sped up by ``r**2``,
each job contributes an atom of weight ``c_r / r`` at ``remaining / c_r``,
with ``c_r = S^{-1}(r)`` and ``S(x) = 1 / int_x^inf y dF(y)``.

The in-service job is held outside the heap; waiting jobs sit in a heap
keyed by ``(remaining, index)``, so both the preemption rule (strictly
smaller arrivals take the server) and the tie rule (smallest index first)
fall out of the ordering.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .measure import srpt_mean_Zstar

__all__ = [
    "pareto_tail_integral",
    "s_inverse",
    "ScalingParams",
    "QueueState",
    "SRPTRun",
    "simulate_trace",
    "fifo_queue_path",
    "queue_length_at",
    "run_srpt",
    "littles_row",
    "littles_law_stats",
]


def _check_alpha(alpha):
    if not alpha > 1:
        raise ValueError("Pareto shape alpha must exceed 1 (finite mean)")


def pareto_tail_integral(x, alpha, x_m):
    """S(x) = 1 / int_x^inf y dF(y) for a Pareto(alpha, x_m) law.

    For ``x >= x_m`` this is ``(alpha-1) x**(alpha-1) / (alpha x_m**alpha)``;
    below ``x_m`` the integral is the full mean and ``S = (alpha-1)/(alpha x_m)``.
    """
    _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    xc = np.maximum(x, x_m)
    out = (alpha - 1.0) * xc ** (alpha - 1.0) / (alpha * x_m**alpha)
    return float(out) if out.ndim == 0 else out


def s_inverse(y, alpha, x_m):
    """S^{-1}(y) = inf{x >= 0 : S(x) > y}.

    Equals ``(alpha x_m**alpha y / (alpha-1))**(1/(alpha-1))`` for
    ``y >= S(x_m)`` and 0 below, where S is flat at ``1/E[v]``.
    """
    _check_alpha(alpha)
    y = np.asarray(y, dtype=float)
    s0 = (alpha - 1.0) / (alpha * x_m)
    with np.errstate(invalid="ignore"):
        c = (alpha * x_m**alpha * np.maximum(y, 0.0) / (alpha - 1.0)) ** (1.0 / (alpha - 1.0))
    out = np.where(y >= s0, c, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ScalingParams:
    """One member of the heavy-traffic sequence.

    The arrival rate is ``lambda_r = (1 - kappa/r) / E[v]`` so that
    ``r (1 - lambda_r E[v]) = kappa`` holds exactly.
    """

    r: float
    p: float
    x_m: float = 2.0 / 3.0
    kappa: float = 1.0
    arrival: str = "poisson"
    gamma_shape: float = 1.0

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not self.alpha > 2:
            raise ValueError("Pareto shape alpha = p + 1 must exceed 2 (finite service variance)")
        if not self.x_m > 0:
            raise ValueError("x_m must be positive")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.r > self.kappa:
            raise ValueError("r must exceed kappa so that the load is below one")
        if self.arrival not in ("poisson", "gamma"):
            raise ValueError("arrival must be 'poisson' or 'gamma'")
        if not self.gamma_shape > 0:
            raise ValueError("gamma_shape must be positive")

    @property
    def alpha(self) -> float:
        return self.p + 1.0

    @property
    def mean_v(self) -> float:
        return self.alpha * self.x_m / (self.alpha - 1.0)

    @property
    def var_v(self) -> float:
        a = self.alpha
        return self.x_m**2 * a / ((a - 1.0) ** 2 * (a - 2.0))

    @property
    def lambda_r(self) -> float:
        return (1.0 - self.kappa / self.r) / self.mean_v

    @property
    def lambda_tilde(self) -> float:
        return 1.0 / self.mean_v

    @property
    def c_r(self) -> float:
        return s_inverse(self.r, self.alpha, self.x_m)

    @property
    def sigma_a_tilde(self) -> float:
        """Limiting interarrival standard deviation."""
        shape = 1.0 if self.arrival == "poisson" else self.gamma_shape
        return 1.0 / (self.lambda_tilde * math.sqrt(shape))

    @property
    def sigma_tilde(self) -> float:
        return math.sqrt(self.lambda_tilde * (self.sigma_a_tilde**2 + self.var_v))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class QueueState:
    """Mutable SRPT state. ``jobs`` holds waiting ``(remaining, index)`` pairs."""

    clock: float = 0.0
    jobs: list = field(default_factory=list)
    in_service: tuple | None = None
    next_arrival: float = math.inf
    served_work: float = 0.0
    completed: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.jobs) + (self.in_service is not None)

    def remaining(self) -> np.ndarray:
        """Remaining times of all jobs in system at ``clock``."""
        vals = [v for v, _ in self.jobs]
        if self.in_service is not None:
            vals.append(self.in_service[0])
        return np.asarray(vals, dtype=float)


@dataclass
class SRPTRun:
    """Trajectory of one run.

    Snapshot arrays are indexed by snapshot; ``atoms`` is a list of
    ``(locations, weight)`` pairs, kept sparse.
    """

    params: dict
    snapshot_times: np.ndarray
    workload: np.ndarray
    queue: np.ndarray
    count: np.ndarray
    atoms: list
    arrival_times: np.ndarray
    sizes: np.ndarray
    departure_times: np.ndarray
    n_arrived: np.ndarray
    n_departed: np.ndarray
    conservation_error: np.ndarray
    busy_starts: np.ndarray
    path_times: np.ndarray | None = None
    path_counts: np.ndarray | None = None

    def snapshot_rows(self):
        """Rows ``(t, atom_location, atom_weight)`` for every atom."""
        for t, (loc, w) in zip(self.snapshot_times, self.atoms):
            for x in loc:
                yield (float(t), float(x), float(w))


def _check_q0(q0):
    q0 = np.asarray(q0 if q0 is not None else [], dtype=float)
    if q0.ndim != 1:
        raise ValueError("q0 must be a flat sequence of sizes")
    if np.any(~np.isfinite(q0)) or np.any(q0 <= 0):
        raise ValueError("initial remaining times must be positive and finite")
    if np.any(np.diff(q0) > 0):
        raise ValueError("q0 must be sorted nonincreasing (index 0 first)")
    return q0


def simulate_trace(arrival_times, sizes, q0=(), until=math.inf, sample_times=(),
                   record_path=False):
    """Run SRPT on a fixed trace in unscaled time.

    Parameters
    ----------
    arrival_times, sizes : array_like
        Arrival epochs (nondecreasing) and processing times of jobs 1, 2, ...
    q0 : sequence of float
        Initial remaining times ``v_0 >= v_{-1} >= ...``; job ``-q0+1`` (the
        last entry, the smallest) is served first.
    until : float
        Stop time. Jobs still in system are left with ``departure = inf``.
    sample_times : array_like
        Sorted times at which the state is sampled.
    record_path : bool
        Record the queue-length step path ``(event time, count after event)``.

    Returns
    -------
    dict with ``departures`` (initial jobs first, in index order), ``samples``
    (list of ``(remaining array, n_arrived, n_departed, served_work)``),
    ``busy_starts`` and optionally ``path_times``/``path_counts``.
    """
    at = np.asarray(arrival_times, dtype=float)
    sz = np.asarray(sizes, dtype=float)
    if at.shape != sz.shape:
        raise ValueError("arrival_times and sizes must have equal length")
    if np.any(np.diff(at) < 0):
        raise ValueError("arrival_times must be nondecreasing")
    q0 = _check_q0(q0)
    n0, n = len(q0), len(at)
    dep = np.full(n0 + n, np.inf)
    ts = np.asarray(sample_times, dtype=float)

    # index -q0+1 .. 0 map to slots 0 .. n0-1; arrivals 1..n to n0 .. n0+n-1
    heap = [(float(v), -k) for k, v in enumerate(q0)]
    heapq.heapify(heap)
    cur = heapq.heappop(heap) if heap else None  # (remaining, index)
    t = 0.0
    served = 0.0
    n_dep = 0
    busy = [0.0] if cur is not None else []
    samples = []
    pt, pc = ([0.0], [n0]) if record_path else (None, None)
    count = n0
    i = 0
    s = 0
    n_s = len(ts)
    inf = math.inf
    push, pop = heapq.heappush, heapq.heappop

    while True:
        t_arr = at[i] if i < n else inf
        t_dep = t + cur[0] if cur is not None else inf
        t_next = min(t_arr, t_dep)
        stop = t_next > until or t_next == inf
        # samples are right-continuous: a sample at an event time sees that event
        while s < n_s and (ts[s] < t_next or (stop and ts[s] <= until)):
            ds = ts[s] - t
            rem = [v for v, _ in heap]
            if cur is not None:
                rem.append(cur[0] - ds)
            samples.append((np.asarray(rem), i, n_dep, served + (ds if cur is not None else 0.0)))
            s += 1
        if stop:
            if cur is not None and until < inf:
                served += until - t
                cur = (cur[0] - (until - t), cur[1])
            t = until if until < inf else t
            break
        if t_dep <= t_arr:
            # departure (ties: departure first, then the arrival sees the freed server)
            served += cur[0]
            t = t_dep
            dep[cur[1] + n0 - 1] = t
            n_dep += 1
            count -= 1
            cur = pop(heap) if heap else None
        else:
            if cur is not None:
                served += t_arr - t
                cur = (cur[0] - (t_arr - t), cur[1])
            t = t_arr
            job = (float(sz[i]), i + 1)
            i += 1
            count += 1
            if cur is None:
                cur = job
                busy.append(t)
            elif job[0] < cur[0]:
                push(heap, cur)
                cur = job
            else:
                push(heap, job)
        if record_path:
            pt.append(t)
            pc.append(count)

    state = QueueState(clock=t, jobs=heap, in_service=cur,
                       next_arrival=at[i] if i < n else inf, served_work=served)
    out = {"departures": dep, "samples": samples, "busy_starts": np.asarray(busy),
           "state": state, "n_arrived": i, "n_departed": n_dep}
    if record_path:
        out["path_times"] = np.asarray(pt)
        out["path_counts"] = np.asarray(pc)
    return out


def fifo_queue_path(arrival_times, sizes, q0=()):
    """Queue-length step path of a FIFO server on the same trace.

    Initial jobs are served first, in index order, then arrivals in order.
    """
    at = np.asarray(arrival_times, dtype=float)
    sz = np.asarray(sizes, dtype=float)
    q0 = _check_q0(q0)
    free = 0.0
    deps = []
    for v in q0[::-1]:
        free += v
        deps.append(free)
    for a, v in zip(at, sz):
        free = max(free, a) + v
        deps.append(free)
    ev = [(0.0, 0)] + [(a, 1) for a in at] + [(d, -1) for d in deps]
    # departures before arrivals at equal times, matching simulate_trace
    ev.sort(key=lambda e: (e[0], e[1]))
    times = np.array([e[0] for e in ev])
    counts = len(q0) + np.cumsum([e[1] for e in ev])
    return times, counts


def queue_length_at(times, path_times, path_counts):
    """Evaluate a right-continuous step path at ``times``."""
    idx = np.searchsorted(path_times, times, side="right") - 1
    return np.asarray(path_counts)[np.maximum(idx, 0)]


def _interarrivals(sp: ScalingParams, rng, n):
    lam = sp.lambda_r
    if sp.arrival == "poisson":
        return rng.exponential(1.0 / lam, n)
    k = sp.gamma_shape
    return rng.gamma(k, 1.0 / (k * lam), n)


def _generate_trace(sp: ScalingParams, t_end, rng):
    """Arrival epochs in [0, t_end) with Pareto(alpha, x_m) sizes."""
    n_guess = int(sp.lambda_r * t_end + 6 * math.sqrt(sp.lambda_r * t_end + 1) + 16)
    gaps = _interarrivals(sp, rng, n_guess)
    times = np.cumsum(gaps)
    while times[-1] < t_end:
        more = np.cumsum(_interarrivals(sp, rng, n_guess)) + times[-1]
        times = np.concatenate([times, more])
    times = times[times < t_end]
    sizes = sp.x_m * (1.0 + rng.pareto(sp.alpha, times.size))
    return times, sizes


def run_srpt(sp: ScalingParams, T, snapshot_times, q0=(), seed=0, store_atoms=True,
             record_path=False, trace=None):
    """Simulate the r-th system up to scaled time ``T``.

    Parameters
    ----------
    sp : ScalingParams
    T : float
        Scaled horizon; the event loop runs to unscaled time ``r**2 T``.
    snapshot_times : array_like
        Scaled times in ``[0, T]``.
    q0 : sequence of float
        Initial remaining times (unscaled), nonincreasing.
    seed : int
    store_atoms : bool
        Keep the sparse atom list at each snapshot.
    record_path : bool
        Keep the unscaled queue-length step path.
    trace : tuple of arrays, optional
        Explicit ``(arrival_times, sizes)`` in unscaled time, replacing the
        random arrival stream (an empty trace means no arrivals).

    Returns
    -------
    SRPTRun
    """
    snaps = np.asarray(snapshot_times, dtype=float)
    if np.any(snaps < 0) or np.any(snaps > T):
        raise ValueError("snapshot times must lie in [0, T]")
    if np.any(np.diff(snaps) < 0):
        raise ValueError("snapshot times must be sorted")
    q0 = _check_q0(q0)
    r2 = sp.r**2
    t_end = r2 * T
    if trace is None:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        at, sz = _generate_trace(sp, t_end, rng)
    else:
        at, sz = (np.asarray(v, dtype=float) for v in trace)
    res = simulate_trace(at, sz, q0=q0, until=t_end, sample_times=snaps * r2,
                         record_path=record_path)
    c, r = sp.c_r, sp.r
    weight = c / r
    n_s = len(res["samples"])
    work = np.empty(n_s)
    queue = np.empty(n_s)
    count = np.empty(n_s, dtype=np.int64)
    n_arr = np.empty(n_s, dtype=np.int64)
    n_dep = np.empty(n_s, dtype=np.int64)
    err = np.empty(n_s)
    atoms = []
    cum = np.concatenate([[0.0], np.cumsum(sz)])
    w0 = float(q0.sum())
    for k, (rem, na, nd, served) in enumerate(res["samples"]):
        total = float(rem.sum())
        work[k] = total / r
        count[k] = rem.size
        queue[k] = weight * rem.size
        n_arr[k], n_dep[k] = na, nd
        err[k] = abs(w0 + cum[na] - served - total)
        if store_atoms:
            atoms.append((rem / c, weight))
    return SRPTRun(
        params=sp.to_dict(), snapshot_times=snaps, workload=work, queue=queue, count=count,
        atoms=atoms, arrival_times=at, sizes=sz, departure_times=res["departures"],
        n_arrived=n_arr, n_departed=n_dep, conservation_error=err,
        busy_starts=res["busy_starts"],
        path_times=res.get("path_times"), path_counts=res.get("path_counts"),
    )


def _batch_means(values, groups, n_batches):
    sums = np.bincount(groups, weights=values, minlength=n_batches)
    cnt = np.bincount(groups, minlength=n_batches)
    ok = cnt > 0
    means = sums[ok] / cnt[ok]
    if means.size == 0:
        return math.nan, math.nan
    se = means.std(ddof=1) / math.sqrt(means.size) if means.size > 1 else math.nan
    return float(means.mean()), float(se)


def littles_row(sp: ScalingParams, run: SRPTRun, T, warmup=0.2, batches=30):
    """Little's-law and workload statistics of one run (see :func:`littles_law_stats`)."""
    if not 0 <= warmup < 1:
        raise ValueError("warmup must be in [0, 1)")
    if batches < 2:
        raise ValueError("need at least two batches")
    r2 = sp.r**2
    t0, t1 = warmup * T * r2, T * r2
    n_busy = int(np.sum(run.busy_starts < t0))
    if n_busy < 10:
        warnings.warn(f"r={sp.r}: warm-up covers only {n_busy} busy cycles", RuntimeWarning,
                      stacklevel=3)
    at = run.arrival_times
    sel = (at >= t0) & (at < t1)
    dep = np.minimum(run.departure_times[run.departure_times.size - at.size:][sel], t1)
    resp = dep - at[sel]
    grp = np.minimum(((at[sel] - t0) / (t1 - t0) * batches).astype(np.int64), batches - 1)
    mean_t, se_t = _batch_means(resp, grp, batches)
    scale = sp.c_r / sp.r
    rhs = sp.mean_v * srpt_mean_Zstar(sp.kappa, sp.lambda_tilde, sp.p, sp.sigma_tilde)
    rate = 2.0 * sp.kappa / sp.sigma_tilde**2
    post = run.snapshot_times >= warmup * T
    work = run.workload[post]
    ks = stats.kstest(work, stats.expon(scale=1.0 / rate).cdf).statistic if work.size else math.nan
    return {
        "r": float(sp.r), "c_r": sp.c_r, "lhs": scale * mean_t, "lhs_se": scale * se_t,
        "rhs": rhs, "ratio": scale * mean_t / rhs,
        "mean_workload": float(work.mean()) if work.size else math.nan,
        "mean_queue": float(run.queue[post].mean()) if work.size else math.nan,
        "ks_workload": float(ks), "busy_cycles_warmup": n_busy,
    }


def littles_law_stats(r_values, p=2.0, x_m=2.0 / 3.0, kappa=1.0, T=200.0, warmup=0.2,
                      batches=30, seed=0, snapshot_dt=0.25, arrival="poisson", gamma_shape=1.0):
    """Both sides of the scaled Little's-law identity over a sweep of ``r``.

    For each ``r`` the run is cut into a warm-up (fraction ``warmup`` of the
    horizon) and ``batches`` equal windows. Jobs are grouped by arrival
    window; a job still present at the horizon contributes its elapsed time.

    Returns
    -------
    list of dict with ``r, c_r, lhs, lhs_se, rhs, ratio, mean_workload,
    mean_queue, ks_workload, busy_cycles_warmup``. ``lhs`` is
    ``(c_r/r) E[T^r]`` and ``rhs`` is ``E[v] E[Z_*]``; ``ks_workload`` is the
    KS distance of the post-warm-up scaled workload snapshots to
    ``Exp(2 kappa / sigma_tilde**2)``.
    """
    rows = []
    for j, r in enumerate(r_values):
        sp = ScalingParams(r=r, p=p, x_m=x_m, kappa=kappa, arrival=arrival, gamma_shape=gamma_shape)
        snaps = np.arange(warmup * T, T + 1e-12, snapshot_dt)
        run = run_srpt(sp, T, snaps, seed=seed + 1000 * j, store_atoms=False)
        rows.append(littles_row(sp, run, T, warmup, batches))
    return rows
