"""Particles pushed by a smooth field solve the continuity equation weakly.

An ensemble drawn from mu is moved along the flow of a sine field. The weak
residual is tested against a battery of terminal-zero test functions, and a
frozen copy of the ensemble serves as a negative control.
"""

import numpy as np

from hilbert_ou.cylinder import sine_field
from hilbert_ou.spectral import build_spectrum
from hilbert_ou.transport import dt_battery, initial_ensemble, push_forward, weak_residual

spec = build_spectrum("power-law", 64, gamma=2.0)
F = sine_field([1.0, 0.5], [[1.0, 0.3], [0.2, 1.0]])
grid = np.linspace(0.0, 1.0, 33)
traj = push_forward(initial_ensemble(spec, 20_000, 11, dims=2), F, spec, grid)
frozen = traj.frozen()

print(f"{'test function':>20} {'residual':>12} {'SE':>10} {'frozen z':>10}")
for u in dt_battery():
    w = weak_residual(traj, u, F, spec)
    z = weak_residual(frozen, u, F, spec).z
    print(f"{u.name:>20} {float(w.estimate.value):12.3e} {float(w.estimate.err):10.2e} {z:10.1f}")
