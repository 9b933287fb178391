"""Time integration of the anisotropic drift-fluid system at fixed eps.

State is (rho, v) on a 3D (or shear-reduced) grid plus the running time
integral G of the parallel electric field E_par = -d_par V, advanced with
the same RK4 stages as the dynamical variables (Simpson on the stages).
The filtered current is w = v - G. Potentials and forces are derived from
rho on demand and never integrated.

The density mean is a conserved, pinned quantity: the k = 0 tendency of
rho vanishes identically (it is a divergence) and the coefficient is reset
to exactly one after every step to stop rounding drift.

The default time step resolves the plasma oscillation of period
2 pi sqrt(eps) with 120 samples; 40 samples per period would resolve the
frequency but lets the RK4 amplitude damping (per step 1 - (omega dt)^6/72
on the energy) eat ~1e-4 of the oscillation energy over ten periods,
far above the 1e-6 conservation target, so the default is stricter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError, BlowUpError, ConfigError
from .poisson import Forces, Potentials, solve_fields
from .spectral import (
    Grid,
    NormParams,
    SpectralField,
    analytic_norm,
    dealias,
    derivative,
    embed_parallel,
    inverse,
    mean,
    perp_average,
    product,
    zeros,
)

DEFAULT_SAMPLES_PER_PERIOD = 120
MIN_SAMPLES_PER_PERIOD = 40   # bare resolvability; the policy warns below this


@dataclass(frozen=True)
class EpsState:
    """Solver state at one instant; fields are immutable values."""

    t: float
    eps: float
    rho: SpectralField
    v: SpectralField
    G: SpectralField   # parallel-only running integral of E_par, G(0) = 0

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    @property
    def w(self) -> SpectralField:
        """Filtered current v - G."""
        return self.v - embed_parallel(self.G, self.grid)

    def fields(self) -> tuple[Potentials, Forces]:
        return solve_fields(self.rho, self.eps)

    def min_rho(self) -> float:
        return float(np.min(inverse(self.rho)))


def make_eps_state(rho: SpectralField, v: SpectralField, eps: float,
                   adm_const: float | None = None) -> EpsState:
    """Validate and normalise initial data.

    Enforces mean(rho) = 1 (pinned), strict positivity on the collocation
    grid, dealiased inputs, and optionally the quasineutral admissibility
    bound |<rho>_perp - 1|_1 <= adm_const * sqrt(eps) in the Wiener norm.
    """
    if eps <= 0.0:
        raise ConfigError(f"eps must be positive, got {eps}")
    if rho.grid != v.grid:
        raise ConfigError("rho and v must share a grid")
    rho = dealias(rho)
    v = dealias(v)
    m = mean(rho)
    if abs(m - 1.0) > 1e-6:
        raise AdmissibilityError(f"mean(rho) = {m!r}, expected 1")
    coeffs = np.array(rho.coeffs, copy=True)
    coeffs[(0,) * rho.grid.ndim] = 1.0
    rho = SpectralField(rho.grid, coeffs, rho.real)
    if float(np.min(inverse(rho))) <= 0.0:
        raise AdmissibilityError("initial density must be strictly positive")
    if adm_const is not None:
        fluct = perp_average(rho) - _unit_line(rho.grid)
        bound = adm_const * math.sqrt(eps)
        val = analytic_norm(fluct, 1.0)
        if val > bound:
            raise AdmissibilityError(
                f"|<rho>_perp - 1|_1 = {val:.3e} exceeds C sqrt(eps) = {bound:.3e}")
    return EpsState(t=0.0, eps=eps, rho=rho, v=v, G=zeros(rho.grid.par_grid))


def _unit_line(grid: Grid) -> SpectralField:
    c = np.zeros(grid.par_grid.shape, dtype=complex)
    c[0] = 1.0
    return SpectralField(grid.par_grid, c)


def dt_policy(eps: float, max_speed_par: float = 0.0, max_speed_perp: float = 0.0,
              grid: Grid | None = None,
              samples_per_period: int = DEFAULT_SAMPLES_PER_PERIOD,
              cfl: float = 0.4) -> float:
    """dt = min(advective CFL, oscillation period / samples_per_period)."""
    dt = 2.0 * math.pi * math.sqrt(eps) / samples_per_period
    if grid is not None:
        if max_speed_par > 0.0:
            dt = min(dt, cfl / (grid.shape[grid.par_axis] * max_speed_par))
        if max_speed_perp > 0.0:
            n_perp = max(grid.shape[i] for i in grid.perp_axes)
            dt = min(dt, cfl / (n_perp * max_speed_perp))
    return dt


def oscillation_period(eps: float) -> float:
    return 2.0 * math.pi * math.sqrt(eps)


def _perp_div(e1: SpectralField, e2: SpectralField, f: SpectralField) -> SpectralField:
    """d1(E1 f) + d2(E2 f) over whichever perpendicular axes exist."""
    grid = f.grid
    out = zeros(grid)
    for comp, label in ((e1, "perp1"), (e2, "perp2")):
        if label in grid.axes:
            out = out + derivative(product(comp, f), label)
    return out


def tendencies(rho: SpectralField, v: SpectralField, eps: float,
               forces: Forces | None = None):
    """(d_t rho, d_t v, forces) for the full system.

    d_t rho is a pure divergence so its k = 0 and exact k_perp = 0
    bookkeeping follow from the spectral derivative (zero at k = 0).
    """
    if forces is None:
        _, forces = solve_fields(rho, eps)
    grid = rho.grid
    drho = -_perp_div(forces.Eperp1, forces.Eperp2, rho) \
        - derivative(product(v, rho), grid.par_axis)
    dv = -_perp_div(forces.Eperp1, forces.Eperp2, v) \
        - product(v, derivative(v, grid.par_axis)) \
        - forces.eps_dpar_phi \
        + embed_parallel(forces.Epar, grid)
    return drho, dv, forces


def rhs(state: EpsState):
    """Tendencies of (rho, v, G); dG/dt = E_par."""
    drho, dv, forces = tendencies(state.rho, state.v, state.eps)
    return drho, dv, forces.Epar


def wave_source(rho: SpectralField, v: SpectralField, forces: Forces,
                eps: float) -> SpectralField:
    """Source of the plasma-wave equation for the parallel field,

        g = d_par^2 <rho v^2>_perp - eps d_par(E_par d_par E_par)
            + d_par <rho (eps d_par phi)>_perp,

    a zero-mean parallel-only field (every term is a parallel derivative).

    Derivation: eps d_par E_par = <rho>_perp - 1, so eps d_t^2 d_par E_par
    = d_t^2 <rho>_perp; continuity gives d_t <rho>_perp = -d_par m with
    m = <rho v>_perp, and the perp-averaged conservative momentum equation
    gives d_t m = -d_par <rho v^2>_perp - <rho eps d_par phi>_perp
    + E_par <rho>_perp. Substituting <rho>_perp = 1 + eps d_par E_par
    yields the force signs above.
    """
    a = perp_average(product(rho, product(v, v)))
    b = product(forces.Epar, derivative(forces.Epar, 0))
    c = perp_average(product(rho, forces.eps_dpar_phi))
    return derivative(derivative(a, 0), 0) - eps * derivative(b, 0) \
        + derivative(c, 0)


def eps_dtE0(rho: SpectralField, v: SpectralField) -> SpectralField:
    """eps * d_t E_par at t = 0, derived from continuity:

        eps d_t E_par = -( <rho v>_perp - its parallel mean ).
    """
    m = perp_average(product(rho, v))
    c = np.array(m.coeffs, copy=True)
    c[0] = 0.0
    return SpectralField(m.grid, -c, m.real)


def _pin_mean(rho: SpectralField) -> SpectralField:
    c = np.array(rho.coeffs, copy=True)
    c[(0,) * rho.grid.ndim] = 1.0
    return SpectralField(rho.grid, c, rho.real)


def step(state: EpsState, dt: float) -> EpsState:
    """Classical RK4 step; G advances through the same stage quadrature."""
    s = state

    def eval_rhs(rho, v):
        drho, dv, forces = tendencies(rho, v, s.eps)
        return drho, dv, forces.Epar

    k1 = eval_rhs(s.rho, s.v)
    k2 = eval_rhs(s.rho + 0.5 * dt * k1[0], s.v + 0.5 * dt * k1[1])
    k3 = eval_rhs(s.rho + 0.5 * dt * k2[0], s.v + 0.5 * dt * k2[1])
    k4 = eval_rhs(s.rho + dt * k3[0], s.v + dt * k3[1])

    def combine(cur, i):
        return cur + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])

    rho = _pin_mean(combine(s.rho, 0))
    v = combine(s.v, 1)
    G = combine(s.G, 2)
    if not (np.all(np.isfinite(rho.coeffs)) and np.all(np.isfinite(v.coeffs))):
        raise BlowUpError(f"non-finite state at t = {s.t + dt}",
                          last_state=s, last_time=s.t)
    return EpsState(t=s.t + dt, eps=s.eps, rho=rho, v=v, G=G)


def energy(state: EpsState) -> float:
    """Conserved energy of the system:

        1/2 int rho v^2 dx
        + eps/2 int (|grad_perp phi|^2 + eps^2 |d_par phi|^2) dx
        + eps/2 int |d_par V|^2 dxpar.

    The kinetic integrand has bandwidth below the collocation Nyquist for
    dealiased states, so the grid mean is the exact integral; the field
    terms are Parseval sums. Conservation by the semi-discrete dynamics is
    exact when the cubic energy fluxes fit under the dealias cutoff
    (3 kmax < N/3 per axis); otherwise it holds up to that truncation.
    """
    pots, _ = state.fields()
    rho_vals = inverse(state.rho)
    v_vals = inverse(state.v)
    kinetic = 0.5 * float(np.mean(rho_vals * v_vals**2))
    grid = state.grid
    kpar = grid.mode_grid(grid.par_axis).astype(float)
    four_pi_sq = (2.0 * np.pi) ** 2
    phi2 = np.abs(pots.phi.coeffs) ** 2
    perp_energy = four_pi_sq * float(np.sum(grid.kperp_sq * phi2))
    par_energy = four_pi_sq * float(np.sum(kpar**2 * phi2))
    kpar_line = grid.par_grid.modes(0).astype(float)
    v_energy = four_pi_sq * float(np.sum(kpar_line**2 * np.abs(pots.V.coeffs) ** 2))
    e = state.eps
    return kinetic + 0.5 * e * (perp_energy + e**2 * par_energy) + 0.5 * e * v_energy


def diagnostics(state: EpsState, params: NormParams | None = None) -> dict:
    params = params or NormParams()
    pots, forces = state.fields()
    fluct = state.rho - _embedded_one(state.grid)
    rec = {
        "t": state.t,
        "mass": mean(state.rho),
        "energy": energy(state),
        "min_rho": state.min_rho(),
        "norm_rho_fluct": analytic_norm(fluct, params.delta),
        "norm_v": analytic_norm(state.v, params.delta),
        "norm_sqrt_eps_Epar": analytic_norm(
            math.sqrt(state.eps) * forces.Epar, params.delta),
    }
    return rec


def _embedded_one(grid: Grid) -> SpectralField:
    c = np.zeros(grid.shape, dtype=complex)
    c[(0,) * grid.ndim] = 1.0
    return SpectralField(grid, c)


@dataclass
class EpsTrajectory:
    """Recorded time series of one run (per-sample parallel fields and
    scalar diagnostics; full states kept only on request)."""

    eps: float
    grid: Grid
    times: np.ndarray
    Epar: np.ndarray          # [n_t, n_par] coefficients
    source: np.ndarray        # wave source g, [n_t, n_par]
    rho_bar: np.ndarray       # <rho>_perp, [n_t, n_par]
    mom_bar: np.ndarray       # <rho v>_perp, [n_t, n_par]
    mass: np.ndarray
    energy: np.ndarray
    min_rho: np.ndarray
    positivity_ok: bool
    eps_dtE0: np.ndarray      # [n_par]
    final_state: "EpsState | None" = None
    norms: dict = field(default_factory=dict)
    states: list = field(default_factory=list)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def par_grid(self) -> Grid:
        return self.grid.par_grid

    def sqrt_eps_Epar(self) -> np.ndarray:
        return math.sqrt(self.eps) * self.Epar

    def rows(self):
        """Flat per-sample records for CSV output."""
        for i, t in enumerate(self.times):
            row = {
                "t": float(t),
                "mass": float(self.mass[i]),
                "energy": float(self.energy[i]),
                "min_rho": float(self.min_rho[i]),
            }
            for key, series in self.norms.items():
                row[key] = float(series[i])
            yield row


def run(state: EpsState, dt: float, n_steps: int, record_every: int = 1,
        norm_params: NormParams | None = None,
        keep_states: bool = False) -> EpsTrajectory:
    """Advance n_steps and record every record_every-th sample (plus t=0).

    A positivity breach is flagged, not fatal; NaN blow-up raises
    BlowUpError carrying the last valid state.
    """
    if n_steps % record_every != 0:
        raise ConfigError("record_every must divide n_steps")
    npar = state.grid.par_grid.shape[0]
    n_rec = n_steps // record_every + 1
    times = np.empty(n_rec)
    epar = np.empty((n_rec, npar), dtype=complex)
    source = np.empty_like(epar)
    rho_bar = np.empty_like(epar)
    mom_bar = np.empty_like(epar)
    mass = np.empty(n_rec)
    en = np.empty(n_rec)
    min_rho = np.empty(n_rec)
    norm_series = {k: np.empty(n_rec) for k in
                   ("norm_rho_fluct", "norm_v", "norm_sqrt_eps_Epar")} \
        if norm_params else {}
    states = []
    positivity_ok = True
    dte0 = eps_dtE0(state.rho, state.v)

    def record(i, st):
        nonlocal positivity_ok
        _, forces = st.fields()
        times[i] = st.t
        epar[i] = forces.Epar.coeffs
        source[i] = wave_source(st.rho, st.v, forces, st.eps).coeffs
        rho_bar[i] = perp_average(st.rho).coeffs
        mom_bar[i] = perp_average(product(st.rho, st.v)).coeffs
        mass[i] = mean(st.rho)
        en[i] = energy(st)
        min_rho[i] = st.min_rho()
        if min_rho[i] <= 0.0:
            positivity_ok = False
        if norm_params:
            d = diagnostics(st, norm_params)
            for k in norm_series:
                norm_series[k][i] = d[k]
        if keep_states:
            states.append(st)

    record(0, state)
    current = state
    for n in range(1, n_steps + 1):
        current = step(current, dt)
        if n % record_every == 0:
            record(n // record_every, current)
    return EpsTrajectory(
        eps=state.eps, grid=state.grid, times=times, Epar=epar, source=source,
        rho_bar=rho_bar, mom_bar=mom_bar, mass=mass, energy=en,
        min_rho=min_rho, positivity_ok=positivity_ok, eps_dtE0=dte0.coeffs,
        final_state=current, norms=norm_series, states=states)
