#!/usr/bin/env python3
# CHSH with the singlet, a local sawtooth model and a few random local models.

import math
import numpy as np
from nonlocal_lab import bell

menu = bell.CANONICAL_MENU
print("menu (a1, a2, b1, b2):", [round(x, 4) for x in menu])

q = bell.quantum_singlet()
print("quantum S:", bell.chsh(q, *menu).S, " vs -2*sqrt(2) =", -2 * math.sqrt(2))
print(bell.chsh(q, *menu).to_dict())

# same table from a two-qubit state vector
print(np.round(bell.statevector_oracle(0.0, math.pi / 4), 6))
print(np.round(q.table(0.0, math.pi / 4), 6))

saw = bell.local_sawtooth()
print("sawtooth S:", round(bell.chsh(saw, *menu).S, 6))

# the correlation curves only touch at multiples of pi/2
for theta in np.linspace(0, math.pi, 9):
    print(f"theta={theta:.3f}  quantum={bell.correlator(q, 0, theta):+.4f}"
          f"  sawtooth={bell.correlator(saw, 0, theta):+.4f}")

# random local models with independent settings never pass 2
worst = max(abs(bell.chsh(bell.random_si_model(s, 1 + s % 8), *menu).S) for s in range(2000))
print("worst |S| over 2000 local models:", worst)

# finite-run estimate, reproducible for a fixed seed
rec = bell.monte_carlo(q, menu, n_runs=200_000, seed=11)
print("Monte Carlo S = %.4f +- %.4f" % (rec.S, rec.S_stderr))
print("runs per pair:", rec.pair_runs)
