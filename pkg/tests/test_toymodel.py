"""Multi-phase toy model: tendencies, energy, relative entropy, and the
stability/instability dichotomy."""

import math

import numpy as np
import pytest

from driftfluid.errors import ConfigError, SolvabilityError
from driftfluid.spectral import Grid, forward, inverse, zeros
from driftfluid.toymodel import (
    ReferenceFlow,
    dichotomy_data,
    dichotomy_experiment,
    electric_field,
    energy,
    make_multi_phase,
    relative_entropy,
    run,
    solve_potential,
    tendencies,
)

from oracles import fd8_derivative


def uniform_state(grid, n_phases, eps, velocity=0.0):
    ones = np.ones(grid.shape)
    rho = [forward(grid, ones) for _ in range(n_phases)]
    u = [(forward(grid, velocity * ones),) for _ in range(n_phases)]
    return make_multi_phase(rho, u, eps)


class TestTendencies:
    def test_equilibrium(self):
        st = uniform_state(Grid.line(16), 2, 0.1)
        drho, du = tendencies(st)
        for d in drho:
            assert np.max(np.abs(d.coeffs)) == 0.0
        for comps in du:
            assert np.max(np.abs(comps[0].coeffs)) == 0.0

    def test_single_phase_reduction(self):
        """N = 1 is the scaled Euler-Poisson system; the field follows
        from the single density alone."""
        grid = Grid.line(32)
        x = grid.coordinates(0)
        eps = 0.05
        rho = forward(grid, 1.0 + 0.1 * np.cos(2 * np.pi * x))
        u = forward(grid, 0.2 * np.sin(2 * np.pi * x))
        st = make_multi_phase([rho], [(u,)], eps)
        drho, du = tendencies(st)
        V = solve_potential(rho, eps)
        expected_E = -2 * np.pi * (0.1 / (eps * (2 * np.pi) ** 2)) \
            * -np.sin(2 * np.pi * x)
        E = electric_field(st)[0]
        assert np.max(np.abs(inverse(E) - expected_E)) < 1e-12
        rv, uv = inverse(rho), inverse(u)
        drho_fd = -fd8_derivative(rv * uv, 0)
        assert np.max(np.abs(inverse(drho[0]) - drho_fd)) < 1e-5

    def test_two_phase_fd_oracle(self, rng):
        grid = Grid.line(64)
        x = grid.coordinates(0)
        eps = 0.2
        rho0 = forward(grid, 1.0 + 0.1 * np.cos(2 * np.pi * x))
        rho1 = forward(grid, 1.0 - 0.1 * np.cos(2 * np.pi * x)
                       + 0.05 * np.sin(4 * np.pi * x))
        u0 = forward(grid, 0.2 + 0.05 * np.sin(2 * np.pi * x))
        u1 = forward(grid, -0.1 + 0.04 * np.cos(4 * np.pi * x))
        st = make_multi_phase([rho0, rho1], [(u0,), (u1,)], eps)
        drho, du = tendencies(st)
        E_vals = inverse(electric_field(st)[0])
        for r, uu, dr, duu in zip(st.rho, st.u, drho, du):
            rv, uv = inverse(r), inverse(uu[0])
            dr_fd = -fd8_derivative(rv * uv, 0)
            du_fd = -uv * fd8_derivative(uv, 0) + E_vals
            assert np.max(np.abs(inverse(dr) - dr_fd)) < 2e-4
            assert np.max(np.abs(inverse(duu[0]) - du_fd)) < 2e-4

    def test_poisson_mean_guard(self):
        grid = Grid.line(16)
        with pytest.raises(SolvabilityError):
            solve_potential(forward(grid, 1.2 * np.ones(16)), 0.1)

    def test_three_dim_support(self):
        grid = Grid.torus3d(8, 8, 8)
        ones = np.ones(grid.shape)
        rho = [forward(grid, ones)] * 2
        u = [tuple(zeros(grid) for _ in range(3))] * 2
        st = make_multi_phase(rho, u, 0.1)
        drho, du = tendencies(st)
        assert np.max(np.abs(drho[0].coeffs)) == 0.0


class TestEnergy:
    def test_equilibrium_zero(self):
        assert energy(uniform_state(Grid.line(16), 2, 0.1)) == 0.0

    def test_rigid_stream_value(self):
        st = uniform_state(Grid.line(16), 3, 0.1, velocity=0.4)
        assert energy(st) == pytest.approx(0.08)

    def test_non_increasing_along_flow(self):
        grid = Grid.line(32)
        eps = 1e-2
        st = dichotomy_data(grid, eps, streaming=0.4)
        dt = 2 * math.pi * math.sqrt(eps) / 120
        traj = run(st, dt, 200)
        increases = np.diff(traj.energy)
        assert np.max(increases, initial=0.0) < 1e-8


class TestRelativeEntropy:
    def test_zero_iff_matching(self):
        grid = Grid.line(16)
        st = uniform_state(grid, 2, 0.1, velocity=0.3)
        ref = ReferenceFlow(velocity=(0.3,))
        assert relative_entropy(st, ref) == 0.0

    def test_quadratic_displacement(self):
        grid = Grid.line(16)
        delta = 0.25
        st = uniform_state(grid, 2, 0.1, velocity=0.3 + delta)
        ref = ReferenceFlow(velocity=(0.3,))
        assert relative_entropy(st, ref) == pytest.approx(0.5 * delta**2)

    def test_nonnegative(self, rng):
        grid = Grid.line(32)
        x = grid.coordinates(0)
        rho0 = forward(grid, 1.0 + 0.2 * np.cos(2 * np.pi * x))
        rho1 = forward(grid, 1.0 - 0.2 * np.cos(2 * np.pi * x))
        u0 = forward(grid, 0.1 * np.sin(2 * np.pi * x))
        u1 = forward(grid, -0.2 * np.ones(32))
        st = make_multi_phase([rho0, rho1], [(u0,), (u1,)], 0.05)
        assert relative_entropy(st, ReferenceFlow(velocity=(0.15,))) > 0.0

    def test_gronwall_envelope_across_sweep(self):
        """Constant reference: the Gronwall factor is 1, so H(T) stays
        within H(0) + o(1), the o(1) shrinking with eps."""
        grid = Grid.line(32)
        ref = ReferenceFlow(velocity=(0.1,))
        overshoots = []
        finals = []
        for eps in (1e-1, 1e-2, 1e-3):
            st = dichotomy_data(grid, eps, streaming=0.0)
            dt = min(2 * math.pi * math.sqrt(eps) / 120, 0.3 / 64)
            traj = run(st, dt, int(math.ceil(0.3 / dt)), ref=ref)
            overshoots.append(np.max(traj.entropy) - traj.entropy[0])
            finals.append(traj.entropy[-1])
        assert all(o < 1e-10 for o in overshoots)
        assert finals[0] > finals[1] > finals[2]

    def test_per_phase_mass_conserved(self):
        grid = Grid.line(32)
        st = dichotomy_data(grid, 1e-2, streaming=0.5)
        dt = 2 * math.pi * 0.1 / 120
        traj = run(st, dt, 150)
        assert np.max(np.abs(traj.masses - traj.masses[0])) < 1e-12


class TestDichotomy:
    def test_sweep_report(self):
        report = dichotomy_experiment([1e-1, 1e-2, 1e-3])
        assert report["stable_strictly_decreasing"]
        assert report["unstable_nondecreasing"]
        assert report["unstable_stays_order_one"]
        for eps in report["eps"]:
            assert report["stable"][eps]["complete"]

    def test_vanishing_streaming_degenerates_to_stable(self):
        rep = dichotomy_experiment([1e-2], streaming=1e-5, horizon=0.1)
        stable = rep["stable"][1e-2]["H_final"]
        unstable = rep["unstable"][1e-2]["H_final"]
        assert unstable == pytest.approx(stable, rel=1e-2, abs=1e-8)

    def test_requires_line_grid(self):
        with pytest.raises(ConfigError):
            dichotomy_data(Grid.torus3d(4, 4, 4), 0.1, 0.5)
