"""Joint law of the maximum field at several sizes.

The two-point CDF and the ``n``-point value are compared with Monte Carlo on
shared paths. The lower-envelope reducer shows which constraints actually bind.

    python demos/joint_law.py
"""

import numpy as np

from rcbm.analytic import correlation_nu, covariance_nu, joint_cdf_2d_nu
from rcbm.ndist import joint_cdf_nd_lines, mc_envelope_probs, reduce_lines

sigma, nu1, nu2 = 1.0, 2.0, 1.0
print(f"Cov(M(nu={nu1}), M(nu={nu2})) = {covariance_nu(nu1, nu2, sigma):.6f}, "
      f"corr = {correlation_nu(nu1, nu2):.4f}")

print("\ntwo-point CDF, closed form vs Monte Carlo (N = 100000)")
pts = [(0.2, 0.5), (0.5, 1.0), (1.0, 2.0)]
sets = [([nu1, nu2], [x1, x2]) for x1, x2 in pts]
est, se, _, H = mc_envelope_probs(sets, sigma, 100_000, 1e-2, seed=1)
for (x1, x2), e, s in zip(pts, est, se):
    exact = joint_cdf_2d_nu(x1, x2, nu1, nu2, sigma)
    print(f"  x = ({x1}, {x2})  exact {exact:.5f}  mc {e:.5f} +- {s:.5f}")

print("\nreducer: which of three constraints bind")
for xs in ([1, 3, 6], [1, 3, 4], [2, 1, 5]):
    print(f"  nus (3, 2, 1), x = {xs}  kept indices {reduce_lines([3, 2, 1], xs)}")

nus, xs = [3.0, 2.0, 1.0], [1.0, 3.0, 6.0]
val = joint_cdf_nd_lines(nus, xs, sigma)
est, se, _, _ = mc_envelope_probs([(nus, xs)], sigma, 100_000, 1e-2, seed=2)
print(f"\nthree-point CDF  quadrature {val:.6f}  mc {est[0]:.5f} +- {se[0]:.5f}")
print(f"independence would give {np.prod([1 - np.exp(-2 * n * x) for n, x in zip(nus, xs)]):.6f}")
