"""
Green and Robin functions on the unit ball
==========================================

Two providers of the regular part H of the Dirichlet Green function: the
closed-form image-charge formula for balls and a fundamental-solution fit
that only needs boundary samples and normals.  On the ball they can be
compared directly.
"""

import numpy as np

from bnreduce import Ball, BallGreen, Generic, MFSGreen, omega

N = 3
exact = BallGreen(Ball.unit(N))

# 1600 boundary samples on a Fibonacci lattice; charges sit outside the
# sphere at four times the local sample spacing
fitted = MFSGreen(Generic.sphere(N, 1600))
print("fit boundary residual", fitted.boundary_residual)

rng = np.random.default_rng(0)
pts = rng.uniform(-0.4, 0.4, (20, N))
err = max(np.max(np.abs(fitted.regular_part(x, pts) - exact.regular_part(x, pts))) for x in pts)
print(f"max |H_fit - H_exact| on 20 x 20 interior pairs: {err:.2e}")

# %%
# Near the boundary the Robin function blows up like the image of a point
# charge at distance 2d, so R(x) (N-2) omega_N (2d)^(N-2) tends to one.

print("\n    d      R(x)         ratio")
for d in [0.2, 0.1, 0.05, 0.02, 0.01, 0.005]:
    x = np.array([1.0 - d, 0.0, 0.0])
    R = exact.robin(x)
    print(f"{d:6.3f}  {R:11.4e}  {R * (N - 2) * omega(N) * (2 * d) ** (N - 2):.6f}")

# %%
# The Robin function of a convex domain is strictly convex; the ball
# Hessian at a few random points:
for x in pts[:3]:
    print("eigenvalues of Hess R:", np.round(np.linalg.eigvalsh(exact.hess_robin(x)), 4))
