"""Moments of the limiting SRPT queue length.

The total mass ``Z* = int M_*(a) / a^2 da`` has a closed-form mean. For the
variance two expressions are printed: the Beta-function formula as commonly
written, and the value obtained by integrating the covariance kernel directly.
A Monte Carlo run shows which one the simulated field follows.

    python demos/queue_moments.py [N]
"""

import math
import sys

from rcbm.measure import (
    mc_Zstar,
    srpt_mean_Zstar,
    srpt_var_Zstar,
    srpt_var_Zstar_consistent,
)

N = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
k, lam, s = 1.0, 1.0, 1.0

print(" p     E[Z*]     Var (Beta form)   Var (kernel integral)")
for p in (1.5, 2.0, 3.0, 5.0):
    print(f"{p:4.1f}  {srpt_mean_Zstar(k, lam, p, s):8.5f}  {srpt_var_Zstar(k, lam, p, s):12.5f}"
          f"  {srpt_var_Zstar_consistent(k, lam, p, s):14.5f}")

r = mc_Zstar(k, lam, 2.0, s, N, 1e-2, seed=0)
print(f"\nMonte Carlo at p = 2, N = {N}:")
print(f"  mean {r['mean']:.4f} +- {r['se_mean']:.4f}   (pi/4 = {math.pi / 4:.4f})")
print(f"  var  {r['var']:.4f} +- {r['se_var']:.4f}   (Beta form 5/12 = {5 / 12:.4f}, "
      f"kernel integral 1/3 = {1 / 3:.4f})")
