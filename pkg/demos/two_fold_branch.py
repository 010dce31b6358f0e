"""Trace the 2-fold eps = 0.01 family from the circle to its limiting state.

Starts near the circle at Omega_2(0.01), continues in impulse and prints
(Omega, pi/2J, 16E/pi, Omega_p) every few steps.  The branch ends when a
corner starts to form on the boundary.  Takes a few minutes.

    python3 demos/two_fold_branch.py [out_dir]
"""

import sys
import time

from vstate.continuation import ContinuationConfig, seed_from_bifurcation, trace_branch, write_branch
from vstate.equilibrium import SolverConfig

cfg = ContinuationConfig(solver=SolverConfig(nodes_per_fold=400), step_j=0.002, max_factor=32, max_steps=400)
t0 = time.perf_counter()
seed = seed_from_bifurcation(0.01, 2, 0.02, 1, cfg)
branch = trace_branch(seed, 1, cfg)

print("step   omega     pi/2J     16E/pi     omega_p")
last = len(branch.states) - 1
for k, s in enumerate(branch.states):
    if k % 10 == 0 or k == last:
        d = s.diagnostics
        print(f"{k:4d}  {s.omega:.6f}  {d.pi_over_2J:.6f}  {d.energy_16_over_pi:+.6f}  {d.omega_p:.6f}")
print(f"termination: {branch.termination} ({branch.reason}) after {time.perf_counter() - t0:.0f} s")
print("reference end point: 0.106827  0.317246  -0.456852")

if len(sys.argv) > 1:
    index = write_branch(branch, sys.argv[1])
    print(f"wrote {len(index['states'])} states to {sys.argv[1]}")
