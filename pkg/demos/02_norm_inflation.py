"""Norm inflation from a small high-frequency perturbation.

Part one uses the synthetic-map harness: the base flow is frozen into the
linear map diag(1/L, L), which stretches a perturbation of frequency k into
something of frequency about kL.  The L2 difference between perturbed and base
vorticity falls like 1/k, while the H^{1,a} ratio grows with L.  This takes
about two seconds.

Part two (``--euler``, about two minutes) runs the same experiment through the
actual Euler solver: one base run to find a site with strong deformation, then
one perturbed run per k.

    python3 demos/02_norm_inflation.py [--euler]
"""

import sys

import numpy as np

from logvort.inflation import ExperimentPlan, run_inflation, synthetic_inflation
from logvort.initdata import LatticeSpec, PerturbationSpec
from logvort.oscint import fit_exponent

ks = np.array([32.0, 64.0, 128.0])
base = LatticeSpec(2, 0.25, (3, 3), 1.0, 3.2).bumps()

print("synthetic map diag(1/L, L)")
print(f"{'L':>5} {'k':>5} {'|w - w~|_L2':>12} {'ratio':>9}")
for L in (16.0, 64.0, 256.0):
    rows = [synthetic_inflation(base, PerturbationSpec(k=k, x0=(0.5, 0.5), L=L, delta=0.2),
                                L, 0.25, 512, 0.5) for k in ks]
    for r in rows:
        print(f"{L:5g} {r.k:5g} {r.omega_diff_l2:12.4e} {r.inflation_ratio:9.2f}")
    print(f"      L2 exponent in k: {fit_exponent(ks, [r.omega_diff_l2 for r in rows]):.3f}\n")

if "--euler" in sys.argv:
    lattice = LatticeSpec(2, 0.25, (3, 3), 1.0, 3.2, 8.0)
    plan = ExperimentPlan("inflation", n=512, box=0.5, t_end=0.4, samples=5, lattice=lattice,
                          k_values=tuple(ks), always_perturb=True, seed_spacing=0.02,
                          site_margin=0.2,
                          perturbation=PerturbationSpec(k=32, x0=(0.7, 0.3), L=1, delta=0.1))
    rep = run_inflation(plan)
    s = rep.site
    print(f"Euler run: site x0={s.x0}, t0={s.t0:.2f}, L={s.L:.2f}, branch {rep.branch}")
    print(f"{'k':>5} {'t':>5} {'L_t':>6} {'|w - w~|_L2':>12} {'|W - w|_H1a':>12} {'ratio':>7}")
    for r in rep.rows:
        print(f"{r.k:5g} {r.t:5.2f} {r.L_t:6.3f} {r.omega_diff_l2:12.4e} "
              f"{r.W_minus_omega_h1a:12.4e} {r.inflation_ratio:7.3f}")
    at_t0 = [rep.at_t0(k) for k in ks]
    print(f"L2 exponent in k at t0: {fit_exponent(ks, [r.omega_diff_l2 for r in at_t0]):.3f}")
