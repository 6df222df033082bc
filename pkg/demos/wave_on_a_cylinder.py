#!/usr/bin/env python3
# Massless field on a circle of circumference L = M*T.
# Asking for period T in time forces period T in space too.

import numpy as np
from nonlocal_lab import cylinder

grid = cylinder.GridSpec(T=1.0, M=4, N=256)
print("L =", grid.L, " dx =", grid.dx)
print("allowed modes:", grid.modes[grid.allowed][:8], "...")  # multiples of M only

# a compact bump, at rest
bump = cylinder.smooth_bump(grid, width=0.25)
s = cylinder.analyze(bump)
print("unprojected periodicity residual:", cylinder.periodicity_residual(s))

# keep only the modes that come back after time T
p = cylinder.project_periodic(s)
print("projected periodicity residual:  ", cylinder.periodicity_residual(p))

# the projected field repeats every T in x
f = cylinder.synthesize(p)
print("spatial repetition residual:", cylinder.spatial_repetition_residual(f))
print("support width before:", cylinder.support_width(bump))
print("support width after: ", cylinder.support_width(f))  # copies all around the circle

# near the bump nothing changed once the copies are summed back
print("window check:", cylinder.locality_window_check(bump, 0.25))

# energy is flat under evolution
e0 = cylinder.energy(f)
for t in (0.1, 0.5, 1.0, 3.7):
    print(f"t={t:4}  energy drift = {abs(cylinder.energy(cylinder.synthesize(p, t)) - e0):.2e}")

# a single disallowed mode does not return
lone = cylinder.analyze(cylinder.single_mode(grid, 1))
print("m=1 periodicity residual:", round(cylinder.periodicity_residual(lone), 4))

# cross check against a plain leapfrog integrator
fine = cylinder.GridSpec(1.0, 4, 1024)
g = cylinder.random_bandlimited(fine, seed=3)
ref = cylinder.evolve(g, 0.5)
fd = cylinder.evolve_fd(g, 0.5)
print("FD vs spectral, rel:", np.linalg.norm(fd.phi - ref.phi) / np.linalg.norm(ref.phi))
