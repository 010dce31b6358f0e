"""Linear theory at a glance: bifurcation rates, Love points, split model.

Prints the rotation rates Omega_m(eps) at which m-fold families leave the
circle, the Love points Q_m of the Kirchhoff ellipses, and the predicted
gap between the two families that reconnect near Q_4 when eps > 0.

    python3 demos/dispersion_and_love.py
"""

import numpy as np

from vstate.analytic import Q4, love_point, omega_m, split_coefficients, split_predictor

print("bifurcation rates Omega_m(eps)")
print("   m   eps=0     eps=0.1   eps=1     eps=3.5")
for m in range(2, 9):
    row = "  ".join(f"{omega_m(e, m):.6f}" for e in (0.0, 0.1, 1.0, 3.5))
    print(f"  {m:2d}   {row}")

print("\nLove points of the Kirchhoff ellipses")
for m in range(3, 9):
    print(f"  Q_{m} = {love_point(m):.15f}")

s = split_coefficients()
print(f"\nreduced equation near Q_4 = {Q4:.12f}: a = {s.a:.12f}, b = {s.b:.12f}, c = {s.c:.12f}")
for eps in (0.05, 0.1, 0.2):
    xp, xm = split_predictor(eps, Q4)
    print(f"  eps = {eps:4.2f}: branch gap at Q_4 is {xp - xm:.6f} (grows like 2 sqrt(a/4) eps = {2 * np.sqrt(s.a / 4) * eps:.6f})")
