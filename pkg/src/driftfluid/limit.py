"""The quasineutral limit system: drift advection in the perpendicular
plane, Burgers-type parallel transport, and the one-dimensional pressure
closure.

The constraint <rho>_perp = 1 replaces the parallel Poisson equation.
Averaging continuity gives d_par <rho v>_perp = 0, and averaging the
conservative momentum balance turns the pressure into an exact parallel
derivative,

    -d_par p = d_par <rho v^2>_perp,

so no elliptic solve is needed: the closure is algebraic and evaluated
from the instantaneous state at every stage. With it, d_t <rho v>_perp = 0
pointwise, so both constraints propagate; the discrete residual (from
dealiasing truncation of triple products) is monitored and the k_perp = 0
tendency modes are projected to zero, which keeps <rho>_perp = 1 exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError, BlowUpError, ConfigError
from .poisson import perp_field, solve_phi
from .spectral import (
    Grid,
    SpectralField,
    dealias,
    derivative,
    embed_parallel,
    forward,
    inverse,
    l2_norm,
    mean,
    perp_average,
    product,
)


@dataclass(frozen=True)
class LimitState:
    t: float
    rho: SpectralField
    v: SpectralField

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    def perp_potential(self) -> SpectralField:
        """phi with E_perp = -grad^perp phi (the eps = 0 symbol)."""
        return solve_phi(self.rho, 0.0)


def pressure_gradient(rho: SpectralField, v: SpectralField) -> SpectralField:
    """d_par p = -d_par <rho v^2>_perp, a zero-mean parallel field."""
    flux = perp_average(product(rho, product(v, v)))
    return -derivative(flux, 0)


def constraint_residuals(rho: SpectralField, v: SpectralField) -> tuple[float, float]:
    """(|<rho>_perp - 1|, |d_par <rho v>_perp|) in L2, the two data
    constraints of the limit system."""
    rb = perp_average(rho)
    c = np.array(rb.coeffs, copy=True)
    c[0] -= 1.0
    mom = perp_average(product(rho, v))
    dmom = derivative(mom, 0)
    return (float(np.sqrt(np.sum(np.abs(c) ** 2))), l2_norm(dmom))


def project_initial(rho0: SpectralField, v0: SpectralField) -> LimitState:
    """Project arbitrary data onto the constraint manifold.

    rho: zero out all k_perp = 0, k_par != 0 modes and pin the mean to 1.
    v:   subtract the minimal parallel-only correction
            (<rho v>_perp - its mean) / <rho>_perp,
    which enforces d_par <rho v>_perp = 0 and is idempotent.
    """
    if rho0.grid != v0.grid:
        raise ConfigError("rho and v must share a grid")
    rho0 = dealias(rho0)
    v0 = dealias(v0)
    if float(np.min(inverse(rho0))) <= 0.0:
        raise AdmissibilityError("density must be strictly positive")
    grid = rho0.grid
    coeffs = np.array(rho0.coeffs, copy=True)
    index = [0] * grid.ndim
    index[grid.par_axis] = slice(None)
    coeffs[tuple(index)] = 0.0
    coeffs[(0,) * grid.ndim] = 1.0
    rho = SpectralField(grid, coeffs, rho0.real)

    mom = perp_average(product(rho, v0))
    mom_vals = inverse(mom) - mean(mom)
    rb_vals = inverse(perp_average(rho))
    corr = embed_parallel(forward(grid.par_grid, mom_vals / rb_vals), grid)
    v = dealias(v0 - corr)
    return LimitState(t=0.0, rho=rho, v=v)


def tendencies(rho: SpectralField, v: SpectralField, with_pressure: bool = True):
    """(d_t rho, d_t v, constraint flux residual).

    The k_perp = 0 modes of d_t rho are analytically -d_par <rho v>_perp,
    zero on the constraint manifold; their discrete magnitude is returned
    as the residual and they are projected out so the constraint holds
    identically.
    """
    grid = rho.grid
    phi = solve_phi(rho, 0.0)
    e1, e2 = perp_field(phi)
    par = grid.par_axis

    drho = -derivative(product(v, rho), par)
    dv = -product(v, derivative(v, par))
    for comp, label in ((e1, "perp1"), (e2, "perp2")):
        if label in grid.axes:
            drho = drho - derivative(product(comp, rho), label)
            dv = dv - derivative(product(comp, v), label)
    if with_pressure:
        dv = dv - embed_parallel(pressure_gradient(rho, v), grid)

    index = [0] * grid.ndim
    index[par] = slice(None)
    line = drho.coeffs[tuple(index)]
    residual = float(np.sqrt(np.sum(np.abs(line) ** 2)))
    coeffs = np.array(drho.coeffs, copy=True)
    coeffs[tuple(index)] = 0.0
    return SpectralField(grid, coeffs, drho.real), dv, residual


def rhs(state: LimitState):
    return tendencies(state.rho, state.v)


def step(state: LimitState, dt: float, with_pressure: bool = True) -> LimitState:
    """Classical RK4 step; raises BlowUpError on non-finite output."""
    s = state
    k1 = tendencies(s.rho, s.v, with_pressure)
    k2 = tendencies(s.rho + 0.5 * dt * k1[0], s.v + 0.5 * dt * k1[1], with_pressure)
    k3 = tendencies(s.rho + 0.5 * dt * k2[0], s.v + 0.5 * dt * k2[1], with_pressure)
    k4 = tendencies(s.rho + dt * k3[0], s.v + dt * k3[1], with_pressure)
    rho = s.rho + (dt / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    v = s.v + (dt / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    if not (np.all(np.isfinite(rho.coeffs)) and np.all(np.isfinite(v.coeffs))):
        raise BlowUpError(f"non-finite limit state at t = {s.t + dt}",
                          last_state=s, last_time=s.t)
    return LimitState(t=s.t + dt, rho=rho, v=v)


@dataclass
class LimitTrajectory:
    grid: Grid
    times: np.ndarray
    ubar: np.ndarray            # <rho v>_perp coefficients, [n_t, n_par]
    residual: np.ndarray        # constraint flux residual per sample
    mass: np.ndarray
    final_state: "LimitState | None" = None
    states: list = field(default_factory=list)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def run(state: LimitState, dt: float, n_steps: int, record_every: int = 1,
        keep_states: bool = False, with_pressure: bool = True) -> LimitTrajectory:
    if n_steps % record_every != 0:
        raise ConfigError("record_every must divide n_steps")
    n_rec = n_steps // record_every + 1
    npar = state.grid.par_grid.shape[0]
    times = np.empty(n_rec)
    ubar = np.empty((n_rec, npar), dtype=complex)
    residual = np.empty(n_rec)
    mass = np.empty(n_rec)
    states = []

    def record(i, st):
        times[i] = st.t
        ubar[i] = perp_average(product(st.rho, st.v)).coeffs
        _, dres = constraint_residuals(st.rho, st.v)
        residual[i] = dres
        mass[i] = mean(st.rho)
        if keep_states:
            states.append(st)

    record(0, state)
    current = state
    for n in range(1, n_steps + 1):
        current = step(current, dt, with_pressure)
        if n % record_every == 0:
            record(n // record_every, current)
    return LimitTrajectory(grid=state.grid, times=times, ubar=ubar,
                           residual=residual, mass=mass, final_state=current,
                           states=states)


def shear_flow(grid: Grid, phi_profile, v_profile) -> LimitState:
    """Shear-flow data: E_perp0 = (0, phi(x1, xpar), 0), so the density
    fluctuation is the shear vorticity -d1 phi and nothing depends on the
    second perpendicular direction. The perpendicular nonlinear terms then
    vanish identically and stay zero under evolution.

    Profiles may be callables of the collocation coordinates or value
    arrays on the grid.
    """
    if "perp1" not in grid.axes:
        raise ConfigError("shear flows need a perp1 axis")
    mesh = grid.meshgrid()

    def evaluate(profile):
        if callable(profile):
            coords = [mesh[grid.axis_index("perp1")], mesh[grid.par_axis]]
            return np.broadcast_to(profile(*coords), grid.shape)
        return np.broadcast_to(np.asarray(profile, dtype=float), grid.shape)

    phi = forward(grid, evaluate(phi_profile))
    if "perp2" in grid.axes:
        k2 = grid.mode_grid("perp2")
        if np.max(np.abs(phi.coeffs[np.broadcast_to(k2 != 0, grid.shape)])) > 1e-12:
            raise ConfigError("shear profile must not depend on perp2")
    rho_vals = 1.0 - inverse(derivative(phi, "perp1"))
    rho = forward(grid, rho_vals)
    v = forward(grid, evaluate(v_profile))
    return project_initial(rho, v)


def two_slab_indicator(grid: Grid) -> SpectralField:
    """Band-limited indicator of the first half of the perp1 axis.

    Requires exactly 4 collocation points along perp1, where
    s = (1 + cos(2 pi x1) + sin(2 pi x1))/2 takes the values {1, 1, 0, 0}.
    Products of fields built from s have perp1 content only at the Nyquist
    sine, which vanishes at all collocation points, so two-valued slab
    dynamics is exact under the 2/3 rule.
    """
    i1 = grid.axis_index("perp1")
    if grid.shape[i1] != 4:
        raise ConfigError("two-slab embedding needs exactly 4 perp1 points")
    x1 = grid.meshgrid()[i1]
    return forward(grid, 0.5 * (1.0 + np.cos(2 * np.pi * x1) + np.sin(2 * np.pi * x1)))


def embed_two_phase(rho1: SpectralField, v1: SpectralField, v2: SpectralField,
                    grid: Grid) -> LimitState:
    """Exact shear embedding of a two-phase state: the first slab carries
    (2 rho1, v1), the second (2 (1 - rho1), v2); slab averages then
    reproduce the two-phase pressure closure identically."""
    s_vals = inverse(two_slab_indicator(grid))
    shape = [1] * grid.ndim
    shape[grid.par_axis] = grid.shape[grid.par_axis]
    r1 = inverse(rho1).reshape(shape)
    rho_vals = 2.0 * r1 * s_vals + 2.0 * (1.0 - r1) * (1.0 - s_vals)
    v_vals = inverse(v1).reshape(shape) * s_vals + inverse(v2).reshape(shape) * (1.0 - s_vals)
    return LimitState(t=0.0, rho=forward(grid, rho_vals), v=forward(grid, v_vals))


def restrict_two_phase(state: LimitState):
    """Inverse of embed_two_phase on a shear grid: read the two slab
    values back off the collocation grid (perp1 indices 0 and 2)."""
    grid = state.grid
    if grid.ndim != 2:
        raise ConfigError("restrict_two_phase expects a shear grid")
    i1 = grid.axis_index("perp1")
    rho_vals = inverse(state.rho)
    v_vals = inverse(state.v)

    def slab(vals, j):
        index = [slice(None)] * grid.ndim
        index[i1] = j
        return vals[tuple(index)]

    par = grid.par_grid
    rho1 = forward(par, 0.5 * slab(rho_vals, 0))
    v1 = forward(par, slab(v_vals, 0))
    v2 = forward(par, slab(v_vals, 2))
    return rho1, v1, v2
