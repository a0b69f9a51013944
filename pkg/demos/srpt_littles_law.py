"""SRPT queue under heavy traffic: Little's law in the scaled limit.

Simulates an M/G/1 SRPT queue with Pareto job sizes (tail index 3) at load
``1 - 1/r`` for growing ``r`` and compares the scaled mean response time with
the limiting value ``E[v] E[Z*]``. Convergence in ``r`` is slow; the ratio
drifts toward 1.

    python demos/srpt_littles_law.py [T]
"""

import sys

from rcbm.srpt_sim import ScalingParams, littles_law_stats

T = float(sys.argv[1]) if len(sys.argv) > 1 else 400.0
sp = ScalingParams(r=10.0, p=2.0)
print(f"E[v] = {sp.mean_v:.3f}, Var v = {sp.var_v:.3f}, sigma~^2 = {sp.sigma_tilde**2:.4f}")

rows = littles_law_stats([5.0, 10.0, 20.0], p=2.0, T=T, seed=0)
print("\n  r    lhs (scaled response)       rhs     ratio   KS(workload)")
for row in rows:
    print(f"{row['r']:4.0f}   {row['lhs']:.4f} +- {row['lhs_se']:.4f}   {row['rhs']:.4f}"
          f"   {row['ratio']:.3f}   {row['ks_workload']:.3f}")
