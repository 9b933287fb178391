"""Exact Fourier-symbol solvers for the two anisotropic Poisson problems.

The screened perpendicular problem

    -eps^2 d_par^2 phi - Lap_perp phi = rho - <rho>_perp

is solved mode-by-mode by division with the symbol
(2 pi)^2 (eps^2 kpar^2 + |kperp|^2); the right-hand side has no
k_perp = 0 content by construction, which is exactly where the symbol
degenerates. The one-dimensional problem

    -eps d_par^2 V = <rho>_perp - 1

is solvable iff the perpendicular average has mean one. Both potentials
are gauged to zero mean; only their gradients enter the dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolvabilityError
from .spectral import (
    SpectralField,
    derivative,
    perp_average,
    zeros,
)

TWO_PI_SQ = (2.0 * np.pi) ** 2


@dataclass(frozen=True)
class Potentials:
    """Electric potentials derived from a charge density at fixed eps."""

    phi: SpectralField          # 3D (or shear) potential, zero k_perp = 0 content
    V: SpectralField            # parallel-only potential, zero mean
    eps: float


@dataclass(frozen=True)
class Forces:
    """Force fields entering the momentum equation.

    Eperp = -grad^perp phi with X^perp = (X_2, -X_1), i.e.
    Eperp = (-d2 phi, d1 phi); it is a rotated gradient, hence
    perpendicular-divergence-free. Epar = -d_par V is parallel-only.
    """

    Eperp1: SpectralField
    Eperp2: SpectralField
    eps_dpar_phi: SpectralField
    Epar: SpectralField
    eps: float


def solve_phi(rho: SpectralField, eps: float) -> SpectralField:
    """Screened perpendicular Poisson solve for phi, zero-mean gauge."""
    grid = rho.grid
    kpar = grid.mode_grid(grid.par_axis)
    symbol = TWO_PI_SQ * (eps**2 * kpar.astype(float) ** 2 + grid.kperp_sq)
    perp_zero = grid.kperp_sq == 0
    safe = np.where(perp_zero, 1.0, symbol)
    coeffs = np.where(perp_zero, 0.0, rho.coeffs / safe)
    return SpectralField(grid, coeffs, rho.real)


def solve_V(rho_bar: SpectralField, eps: float, tol: float = 1e-8) -> SpectralField:
    """1D parallel Poisson solve -eps d_par^2 V = rho_bar - 1, zero-mean gauge."""
    grid = rho_bar.grid
    if grid.ndim != 1:
        raise SolvabilityError("solve_V expects a parallel-only field")
    mean = float(np.real(rho_bar.coeffs[0]))
    if abs(mean - 1.0) > tol:
        raise SolvabilityError(
            f"perpendicular average has mean {mean!r}; the parallel Poisson "
            "equation is solvable only for mean 1")
    k = grid.modes(0).astype(float)
    safe = np.where(k == 0, 1.0, eps * TWO_PI_SQ * k**2)
    coeffs = np.where(k == 0, 0.0, rho_bar.coeffs / safe)
    return SpectralField(grid, coeffs, rho_bar.real)


def perp_field(phi: SpectralField) -> tuple[SpectralField, SpectralField]:
    """E_perp = -grad^perp phi = (-d2 phi, d1 phi).

    On shear grids (no perp2 axis) the first component vanishes
    identically and the second is d1 phi.
    """
    grid = phi.grid
    axes = dict((ax, i) for i, ax in enumerate(grid.axes))
    e1 = -derivative(phi, axes["perp2"]) if "perp2" in axes else zeros(grid)
    e2 = derivative(phi, axes["perp1"]) if "perp1" in axes else zeros(grid)
    return e1, e2


def parallel_force(V: SpectralField) -> SpectralField:
    """E_par = -d_par V (parallel-only)."""
    return -derivative(V, 0)


def solve_fields(rho: SpectralField, eps: float) -> tuple[Potentials, Forces]:
    """All potentials and forces for a given charge density."""
    phi = solve_phi(rho, eps)
    V = solve_V(perp_average(rho), eps)
    e1, e2 = perp_field(phi)
    grid = rho.grid
    eps_dpar_phi = eps * derivative(phi, grid.par_axis)
    return (
        Potentials(phi=phi, V=V, eps=eps),
        Forces(Eperp1=e1, Eperp2=e2, eps_dpar_phi=eps_dpar_phi,
               Epar=parallel_force(V), eps=eps),
    )
