import math

import numpy as np
import pytest

from nonlocal_lab.errors import NumericalError, UsageError
from nonlocal_lab.mechanics import (
    ParticleState,
    _pair_forces,
    circular_orbit,
    init_zero_momentum,
    integrate,
    momentum_constraint_jacobian,
    potential_energy,
    total_energy,
    total_momentum,
    trajectory_to_csv,
)


class TestInit:
    @pytest.mark.parametrize("seed", range(50))
    def test_zero_total_momentum(self, seed):
        s = init_zero_momentum(2 + seed % 63, seed)
        assert np.abs(total_momentum(s)).max() <= 1e-15

    def test_two_body_antisymmetry(self):
        s = init_zero_momentum(2, 9)
        np.testing.assert_array_equal(s.momenta[1], -s.momenta[0])

    def test_deterministic(self):
        a, b = init_zero_momentum(10, 4), init_zero_momentum(10, 4)
        np.testing.assert_array_equal(a.positions, b.positions)
        np.testing.assert_array_equal(a.momenta, b.momenta)
        np.testing.assert_array_equal(a.masses, b.masses)

    def test_needs_two(self):
        with pytest.raises(UsageError):
            init_zero_momentum(1, 0)


class TestTotalMomentum:
    def test_single(self):
        s = ParticleState([[0.0, 0.0]], [[1.0, 2.0]], [1.0])
        np.testing.assert_array_equal(total_momentum(s), [1.0, 2.0])

    def test_reversed_copy_cancels(self):
        rng = np.random.default_rng(0)
        pos = rng.uniform(size=(5, 2))
        mom = rng.normal(size=(5, 2))
        s = ParticleState(np.vstack([pos, pos]), np.vstack([mom, -mom]), np.ones(10))
        np.testing.assert_array_equal(total_momentum(s), [0.0, 0.0])

    def test_invalid_mass(self):
        with pytest.raises(UsageError):
            ParticleState([[0.0, 0.0]], [[0.0, 0.0]], [0.0])

    def test_non_finite(self):
        with pytest.raises(NumericalError):
            ParticleState([[np.inf, 0.0]], [[0.0, 0.0]], [1.0])


class TestIntegrate:
    @pytest.mark.parametrize("n,seed", [(2, 0), (8, 1), (64, 2)])
    def test_momentum_conserved(self, n, seed):
        probe = integrate(init_zero_momentum(n, seed), 1e-3, 10_000)
        worst = max(np.abs(total_momentum(s)).max() for s in probe.states)
        assert worst <= 1e-12

    @pytest.mark.parametrize("n,seed", [(2, 5), (16, 1), (64, 0)])
    def test_energy_drift_bounded(self, n, seed):
        probe = integrate(init_zero_momentum(n, seed), 1e-3, 10_000)
        energies = np.array([total_energy(s) for s in probe.states])
        assert np.abs(energies - energies[0]).max() / abs(energies[0]) <= 1e-4

    def test_probe_sampling(self):
        probe = integrate(init_zero_momentum(4, 0), 1e-2, 640)
        assert len(probe) == 65
        assert probe.times[0] == 0.0 and probe.times[-1] == pytest.approx(6.4)

    def test_free_particles_move_straight(self):
        s = ParticleState([[0.0, 0.0], [100.0, 0.0]], [[1.0, 0.5], [-1.0, -0.5]], [1.0, 2.0])
        probe = integrate(s, 0.01, 100, cutoff=10.0)
        end = probe.states[-1]
        np.testing.assert_allclose(end.positions, [[1.0, 0.5], [99.5, -0.25]], atol=1e-12)
        np.testing.assert_array_equal(end.momenta, s.momenta)

    def test_circular_orbit_radius(self):
        s, period = circular_orbit()
        dt = period / 5000
        probe = integrate(s, dt, 5000)
        sep = [np.linalg.norm(x.positions[0] - x.positions[1]) for x in probe.states]
        assert max(abs(r - 1.0) for r in sep) <= 1e-3
        np.testing.assert_allclose(probe.states[-1].positions, s.positions, atol=1e-2)

    def test_pair_force_matches_potential_gradient(self):
        # finite-difference oracle for the softened force law
        s = init_zero_momentum(3, 7)
        forces = _pair_forces(s.positions, s.masses, 0.01, 0.1, None)
        h = 1e-6
        for i in range(3):
            for c in range(2):
                plus = s.positions.copy()
                minus = s.positions.copy()
                plus[i, c] += h
                minus[i, c] -= h
                grad = (potential_energy(ParticleState(plus, s.momenta, s.masses))
                        - potential_energy(ParticleState(minus, s.momenta, s.masses))) / (2 * h)
                assert forces[i, c] == pytest.approx(-grad, rel=1e-6, abs=1e-10)

    def test_bad_dt(self):
        with pytest.raises(UsageError):
            integrate(init_zero_momentum(2, 0), 0.0, 10)

    def test_blowup_names_step(self):
        s = ParticleState([[0.0, 0.0], [0.0, 0.0]], [[1e308, 0.0], [-1e308, 0.0]], [1e-300, 1e-300])
        with pytest.raises(NumericalError, match="step 1"):
            integrate(s, 1.0, 5)


def test_constraint_removes_two_momentum_dof():
    for n in (2, 5, 64):
        J = momentum_constraint_jacobian(n)
        assert J.shape == (2, 2 * n)
        assert np.linalg.matrix_rank(J) == 2
        # free momentum directions = null space of J
        _, sv, vt = np.linalg.svd(J)
        null = vt[np.sum(sv > 1e-12):]
        assert null.shape[0] == 2 * n - 2
        assert np.abs(J @ null.T).max() <= 1e-12
        p = init_zero_momentum(n, 1).momenta.ravel()
        assert np.abs(J @ p).max() <= 1e-15


def test_trajectory_csv(tmp_path):
    probe = integrate(init_zero_momentum(4, 0), 1e-3, 128)
    path = tmp_path / "traj.csv"
    trajectory_to_csv(probe, 1e-3, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,t,px_total,py_total,energy"
    assert len(lines) == 1 + len(probe)
    assert lines[-1].startswith("128,")
    assert math.isfinite(float(lines[1].split(",")[4]))
