"""
Boundary quadratic forms on small spheres
=========================================

P(u, v, theta) and Q(u, v, theta) are surface integrals over the sphere of
radius theta around a point x*.  When u and v are harmonic away from x*
neither depends on theta, and for Green functions they reduce to Robin
and Green values at x*.
"""

import numpy as np

from bnreduce import Ball, BallGreen
from bnreduce.asymptotics import green_field, quadratic_form_P, quadratic_form_Q

N = 5
prov = BallGreen(Ball.unit(N))
xs = np.array([0.2, 0.1, 0.0, 0.0, 0.0])
zs = np.array([-0.3, 0.2, 0.1, 0.0, 0.0])
Gx, Gz = green_field(prov, xs), green_field(prov, zs)

print("theta    P(Gx,Gx)          P(Gx,Gz)          Q_1(Gx,Gx)")
for th in (0.05, 0.1, 0.2):
    print(f"{th:5.2f}  {quadratic_form_P(Gx, Gx, th, xs):.14f}  "
          f"{quadratic_form_P(Gx, Gz, th, xs):.14f}  {quadratic_form_Q(Gx, Gx, th, xs, 0):.12f}")

print("\n-(N-2) R(x*)/2      ", -(N - 2) * prov.robin(xs) / 2)
print("(N-2) G(x*, z*)/4   ", (N - 2) * prov.green(xs, zs) / 4)
print("-dR/dx_1 (x*)       ", -prov.grad_robin(xs)[0])
