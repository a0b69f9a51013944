"""Stationary laws of reflecting coupled Brownian motions.

Closed forms for the maximum field ``M_*(a) = sup_t (sigma B_t - mu(a) t)``
(marginals, 2-d and n-d joint laws, covariances), its measure-valued total
mass, Monte Carlo path simulation of the reflected field, and a
discrete-event SRPT queue for the heavy-tailed heavy-traffic regime.
"""

__version__ = "0.1.0"
