"""
Blow-up along a family of radial solutions
==========================================

For each peak value M, shoot from u(0) = M and adjust eps until the
solution first vanishes at r = 1.  As M grows the solutions concentrate,
and the sweep can be checked against the predicted laws: eps lam^k tends
to a constant, the remainder after removing a projected bubble decays
like a power of lam, and far from the peak lam^((N-2)/2) u approaches a
multiple of the Green function.

Writes sweep.csv in the working directory.
"""

import numpy as np

from bnreduce import Ball, BallGreen, ProblemParams, sweep
from bnreduce import asymptotics as asy
from bnreduce.storage import write_table

params = ProblemParams(5, 3.0)
prov = BallGreen(Ball.unit(5))
entries = sweep(params, np.geomspace(10, 1e4, 16), threads=4)
prof = [e.profile for e in entries]
eps = np.array([e.eps for e in entries])
lam = np.array([p.lam_bubble for p in prof])

fit = asy.verify_blowup_rate(params, eps, lam)
print(f"eps ~ lam^{fit.exponent:.4f}   (predicted {fit.expected_exponent})")
print(f"eps lam^k at the top: {fit.constant:.5f}   limit {fit.expected_constant:.5f}")

# %%
# Bubble extraction by projection: minimise the H^1_0 distance to PU_{0,lam}.

dec = [asy.extract_bubble(p, "projection") for p in prof]
w = np.array([d.w_norm_h1 for d in dec])
wfit = asy.verify_w_decay(params, [d.lam for d in dec], w)
print(f"||w|| ~ lam^{wfit.exponent:.3f}   (predicted {wfit.expected_exponent})")

# %%
# Green-function limit at r = 0.7 and both Pohozaev balances.

rows = []
for e, p, d in zip(entries, prof, dec):
    gl = asy.green_limit_check(p, prov, radii=(0.7,))[0]["gap"]
    pg = asy.pohozaev_global(p).relative_residual
    rows.append([p.M, e.eps, p.lam_bubble, d.lam, d.w_norm_h1, gl, pg])
    print(f"M={p.M:9.1f}  eps={e.eps:.3e}  lam={p.lam_bubble:8.3f}  fit={d.lam:8.3f}  "
          f"w={d.w_norm_h1:.2e}  green gap={gl:.2e}  pohozaev={pg:.1e}")

write_table("sweep.csv", ["M", "eps", "lam_bubble", "lam_projection", "w_norm",
                          "green_gap", "pohozaev_residual"], rows)
