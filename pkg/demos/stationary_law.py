"""Stationary maximum of a drifted Brownian motion against its exponential law.

Draws ``M_*(a)`` at a few job sizes for the SRPT drift ``mu(a) = 1 + 1/a^2``,
compares empirical quantiles with ``Exp(2 mu(a) / sigma^2)`` and reports the
KS distance. Also shows how the truncation horizon grows as the drift shrinks.

    python demos/stationary_law.py
"""

import numpy as np
from scipy import stats

from rcbm.analytic import horizon_for_gap, stationary_max_cdf
from rcbm.bm_sim import sample_stationary_max
from rcbm.drift import SRPTDrift

spec = SRPTDrift(kappa=1.0, lambda_tilde=1.0, p=2.0, sigma=1.0)
N = 20_000

print("horizon needed for a 1e-3 CDF gap")
for nu in (4.0, 2.0, 1.0, 0.5):
    print(f"  nu = {nu:4.1f}   T* = {horizon_for_gap(nu, 1.0, 1e-3):8.3f}")

print(f"\nstationary maximum, N = {N}")
for k, a in enumerate((0.5, 1.0, 4.0)):
    rate = 2.0 * float(spec.mu(a)) / spec.sigma**2
    m = sample_stationary_max(spec, a, cdf_gap=1e-3, dt=1e-2, seed=k, n=N)
    ks = stats.kstest(m, stats.expon(scale=1 / rate).cdf).statistic
    q = np.quantile(m, [0.25, 0.5, 0.9])
    exact = stats.expon(scale=1 / rate).ppf([0.25, 0.5, 0.9])
    print(f"  a = {a:3.1f}  mu = {spec.mu(a):5.2f}  KS = {ks:.4f}")
    print(f"      quantiles mc {np.round(q, 4)}  exact {np.round(exact, 4)}")
    print(f"      P(M <= median) = {stationary_max_cdf(exact[1], a, spec):.4f}")
