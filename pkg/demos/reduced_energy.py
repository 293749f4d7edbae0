"""
Critical points of the reduced energy
=====================================

Phi_n(x, lam) lives on n concentration points and n heights.  With a single
point on a ball the only critical point is the centre; with two points on
a convex domain there is none, so every Newton search is pushed into a
collision or through the boundary.
"""

import numpy as np

from bnreduce import (Ball, BallGreen, LeftDomain, NoConvergence, ProblemParams,
                      find_critical, single_peak_lambda, unique_lambda)

N, q = 5, 3.0
params = ProblemParams(N, q)
prov = BallGreen(Ball.unit(N))

cp = find_critical(prov, params, [[0.3, -0.1, 0.2, 0.0, 0.1]], [1.0])
print("single peak: x =", np.round(cp.config.points[0], 12), " lam =", cp.config.lambdas[0])
print("closed-form height:", single_peak_lambda(params, prov.robin(np.zeros(N))))
print("Hessian eigenvalues:", np.round(cp.hessian_eigenvalues, 5))

# %%
# Heights alone: for q >= 2* - 1 the height problem at fixed points is a
# convex minimisation, so it has one solution whatever the start.

pts = np.array([[0.6, 0, 0, 0, 0], [-0.6, 0.1, 0, 0, 0]])
print("\nheights at fixed points:", unique_lambda(prov, params, pts),
      unique_lambda(prov, params, pts, start=[10.0, 0.1]))

# %%
# Twenty random two-point starts.

rng = np.random.default_rng(1)
outcome = {}
for _ in range(20):
    x0 = rng.uniform(-0.25, 0.25, (2, N))
    try:
        find_critical(prov, params, x0, rng.uniform(0.5, 2.0, 2))
        outcome["converged"] = outcome.get("converged", 0) + 1
    except (LeftDomain, NoConvergence) as exc:
        outcome[type(exc).__name__] = outcome.get(type(exc).__name__, 0) + 1
print("\ntwo-peak searches:", outcome)
