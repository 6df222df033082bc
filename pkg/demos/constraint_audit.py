#!/usr/bin/env python3
# Which constraints survive the dynamics, and which only hold for an instant.

from nonlocal_lab import cylinder, mechanics
from nonlocal_lab.constraints import check_conservation, two_point_equality_constraint, uniform_times

# N particles with zero total momentum
s = mechanics.init_zero_momentum(32, seed=0)
probe = mechanics.integrate(s, 1e-3, 5000)
r = check_conservation(probe, mechanics.total_momentum_constraint(), 1e-9)
print(r.label, r.verdict, r.max_residual)
print("energy drift:", abs(mechanics.total_energy(probe.states[-1]) - mechanics.total_energy(s)))

# time-periodicity on the cylinder
grid = cylinder.GridSpec(1.0, 4, 256)
f = cylinder.project_field(cylinder.random_bandlimited(grid, seed=2))
wave = cylinder.spectral_trajectory(cylinder.analyze(f), 2 * grid.T)
r = check_conservation(wave, cylinder.periodic_subspace_constraint(), 1e-9)
print(r.label, r.verdict, r.max_residual)

# phi(x0) == phi(x0+d) holds at t=0 for a travelling wave, then breaks
d = grid.T / 2
moving = cylinder.analyze(cylinder.single_mode(grid, grid.M, direction="right"))
r = check_conservation(cylinder.spectral_trajectory(moving, grid.T),
                       two_point_equality_constraint(-d / 2, d), 1e-3)
print(r.label, r.verdict, r.max_residual)
print("residual at t=0:", r.residuals[0][1])

print(r.with_threshold(10.0).verdict)  # threshold only moves the verdict
print(len(uniform_times(1.0)), "probe times by default")
