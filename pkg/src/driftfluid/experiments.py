"""Composite experiments shared by the CLI runner and the acceptance
suite: the quasineutral convergence sweep, the oscillation-filtering
sweep, and the contraction study."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import ck, epsilon, limit, oscillations
from .spectral import (
    Grid,
    NormParams,
    SpectralField,
    embed_parallel,
    forward,
    l2_norm,
)


def matched_well_prepared_data(grid: Grid, amplitude: float = 0.05):
    """Initial data admissible for every eps and already on the limit
    constraint manifold: <rho>_perp = 1 exactly and <rho v>_perp = 0
    exactly (perpendicular structures on orthogonal modes)."""
    mesh = grid.meshgrid()
    x1 = mesh[grid.axis_index("perp1")]
    x2 = mesh[grid.axis_index("perp2")]
    xp = mesh[grid.par_axis]
    rho = 1.0 + amplitude * np.cos(2 * np.pi * x1) * np.cos(2 * np.pi * xp)
    v = amplitude * np.cos(2 * np.pi * x2) * np.sin(2 * np.pi * xp)
    return forward(grid, rho), forward(grid, v)


def _two_leg_eps_run(state, dt, n1, n2):
    leg1 = epsilon.run(state, dt, n1)
    leg2 = epsilon.run(leg1.final_state, dt, n2)
    series = {
        "times": np.concatenate([leg1.times, leg2.times[1:]]),
        "Epar": np.concatenate([leg1.Epar, leg2.Epar[1:]]),
        "mom_bar": np.concatenate([leg1.mom_bar, leg2.mom_bar[1:]]),
        "mass": np.concatenate([leg1.mass, leg2.mass[1:]]),
        "energy": np.concatenate([leg1.energy, leg2.energy[1:]]),
    }
    return leg1.final_state, series


@dataclass
class SweepEntry:
    eps: float
    rho_error: float            # |rho_eps - rho|_L2 at the comparison time
    v_error_filtered: float     # |v_eps - osc. correctors - v|_L2
    v_error_raw: float
    residual: float             # averaged corrector-subtraction residual
    mass_drift: float
    energy_drift: float


@dataclass
class SweepResult:
    grid: Grid
    horizon: float
    compare_time: float
    entries: list[SweepEntry]

    def strictly_decreasing(self, attr: str) -> bool:
        vals = [getattr(e, attr) for e in
                sorted(self.entries, key=lambda e: -e.eps)]
        return all(b < a for a, b in zip(vals, vals[1:]))


def quasineutral_sweep(eps_list, grid: Grid | None = None,
                       amplitude: float = 0.05, horizon: float = 2.5,
                       compare_time: float = 2.25,
                       average_range: tuple[float, float] = (0.5, 2.5),
                       samples_per_period: int = 120) -> SweepResult:
    """Convergence of the eps system to the limit system from matched
    well-prepared data.

    The correctors follow the limit theorem's construction: initial
    envelopes from the data (zero here, computed generically) transported
    by the mean parallel current of the limit flow. Reported per eps:
    density error and corrector-filtered velocity error at compare_time,
    and the corrector-subtraction residual averaged over average_range
    (common to all sweep members)."""
    grid = grid or Grid.torus3d(4, 4, 16)
    rho0, v0 = matched_well_prepared_data(grid, amplitude)
    lim0 = limit.project_initial(rho0, v0)
    entries = []
    for eps in sorted(eps_list, reverse=True):
        dt = epsilon.dt_policy(eps, samples_per_period=samples_per_period)
        n1 = int(round(compare_time / dt))
        n2 = max(int(math.ceil((horizon - compare_time) / dt)), 4)
        state = epsilon.make_eps_state(rho0, v0, eps)
        eps_mid, series = _two_leg_eps_run(state, dt, n1, n2)

        lim_leg1 = limit.run(lim0, dt, n1)
        lim_mid = lim_leg1.final_state
        lim_leg2 = limit.run(lim_mid, dt, n2)
        ubar = np.concatenate([lim_leg1.ubar, lim_leg2.ubar[1:]])
        times = series["times"]

        # correctors: initial data from the eps data, transport by the
        # limit flow's mean parallel current
        sq = math.sqrt(eps)
        E0 = SpectralField(grid.par_grid, sq * series["Epar"][0])
        m0 = SpectralField(grid.par_grid, series["mom_bar"][0])
        ep0, em0 = oscillations.corrector_initial_data(E0, m0)
        corr = oscillations.advect_correctors(ep0, em0, times, ubar)

        res = oscillations.oscillation_residual(
            times, sq * series["Epar"], corr.Eplus, corr.Eminus, eps)
        sel = (times >= average_range[0]) & (times <= average_range[1])

        j = int(np.argmin(np.abs(times - compare_time)))
        osc = oscillations.reconstruct_W(times[j: j + 1], corr.Eplus[j: j + 1],
                                         corr.Eminus[j: j + 1], eps)[0]
        osc_field = SpectralField(grid.par_grid, osc, real=False)
        dv_raw = eps_mid.v - lim_mid.v
        dv_filt = dv_raw - embed_parallel(osc_field, grid)
        drho = eps_mid.rho - lim_mid.rho
        entries.append(SweepEntry(
            eps=float(eps),
            rho_error=l2_norm(drho),
            v_error_filtered=float(np.sqrt(np.sum(np.abs(dv_filt.coeffs) ** 2))),
            v_error_raw=l2_norm(dv_raw),
            residual=float(np.mean(res[sel])),
            mass_drift=float(np.max(np.abs(series["mass"] - 1.0))),
            energy_drift=float(np.max(np.abs(series["energy"] - series["energy"][0]))),
        ))
    return SweepResult(grid=grid, horizon=horizon, compare_time=compare_time,
                       entries=entries)


@dataclass
class FilterEntry:
    eps: float
    residual: float      # demodulated corrector subtraction, averaged
    w_average: float     # |time-average of W|_L2 (weak smallness)


@dataclass
class FilterResult:
    entries: list[FilterEntry]

    def strictly_decreasing(self, attr: str) -> bool:
        vals = [getattr(e, attr) for e in
                sorted(self.entries, key=lambda e: -e.eps)]
        return all(b < a for a, b in zip(vals, vals[1:]))


def filtering_sweep(eps_list, n_par: int = 16, alpha: float = 0.05,
                    horizon: float = 11.0,
                    average_range: tuple[float, float] = (4.0, 4.6),
                    window_periods: int = 2) -> FilterResult:
    """Demodulation efficacy on ill-prepared (oscillation-carrying) but
    admissible data: rho = 1 + alpha sqrt(eps) cos(2 pi xpar) carries an
    O(1) envelope of sqrt(eps) E_par. Both the residual after subtracting
    the demodulated correctors and the filtered primitive W shrink along
    the sweep. Perp-independent data keeps the long horizon needed by the
    largest-eps demodulation window free of drift instabilities."""
    grid = Grid.shear2d(4, n_par)
    xp = grid.meshgrid()[grid.par_axis]
    entries = []
    for eps in sorted(eps_list, reverse=True):
        rho0 = forward(grid, 1.0 + alpha * math.sqrt(eps) * np.cos(2 * np.pi * xp))
        state = epsilon.make_eps_state(rho0, forward(grid, np.zeros(grid.shape)),
                                       eps, adm_const=2.0 * alpha)
        dt = epsilon.dt_policy(eps)
        n_steps = int(math.ceil(horizon / dt))
        traj = epsilon.run(state, dt, n_steps)
        sq = math.sqrt(eps)
        W0c = np.array(traj.mom_bar[0], copy=True)
        W0c[0] = 0.0
        dec = oscillations.decompose(traj.times, traj.Epar, eps,
                                     SpectralField(grid.par_grid, W0c))
        corr = oscillations.extract_correctors(dec.times, sq * dec.E1, eps,
                                               window_periods=window_periods)
        i0 = int(np.searchsorted(dec.times, corr.times[0] - 1e-12))
        res = oscillations.oscillation_residual(
            corr.times, sq * traj.Epar[i0: i0 + len(corr.times)],
            corr.Eplus, corr.Eminus, eps)
        sel_r = (corr.times >= average_range[0]) & (corr.times <= average_range[1])
        # weak smallness: W oscillates at O(1) amplitude but its time
        # average over a fixed window shrinks like sqrt(eps)
        sel_w = (dec.times >= average_range[0]) & (dec.times <= average_range[1])
        w_mean_field = np.mean(dec.W[sel_w], axis=0)
        entries.append(FilterEntry(
            eps=float(eps),
            residual=float(np.mean(res[sel_r])),
            w_average=float(np.sqrt(np.sum(np.abs(w_mean_field) ** 2)))))
    return FilterResult(entries=entries)


@dataclass
class ContractionStudy:
    eta: float
    rows: list
    max_ratio: float
    sup_l2_vs_rk4: float


def contraction_study(eps: float = 0.25, amplitude: float = 0.01,
                      grid: Grid | None = None,
                      params: NormParams | None = None,
                      delta1: float = 1.1, n_keep: int = 10,
                      target: float = 0.5) -> ContractionStudy:
    """Bisect eta for the halving contraction rate, report the
    consecutive-difference table, and compare the converged iterate with
    the RK4 trajectory on the same time grid."""
    grid = grid or Grid.torus3d(4, 4, 8)
    mesh = grid.meshgrid()
    x1 = mesh[grid.axis_index("perp1")]
    xp = mesh[grid.par_axis]
    rho0 = forward(grid, 1.0 + amplitude * math.sqrt(eps) * np.cos(2 * np.pi * xp)
                   + 0.5 * amplitude * np.cos(2 * np.pi * x1) * np.cos(2 * np.pi * xp))
    v0 = forward(grid, 0.5 * amplitude * np.sin(2 * np.pi * xp))
    state = epsilon.make_eps_state(rho0, v0, eps)
    params = params or NormParams(delta0=1.5, delta=1.1, eta=1.0, beta=0.5)
    dt_target = epsilon.dt_policy(eps)
    eta = ck.bisect_eta(state.rho, state.v, eps, params, delta1, dt_target,
                        target=target)
    tuned = replace(params, eta=eta)
    iterates = ck.run_scheme(state.rho, state.v, eps, tuned, delta1, dt_target,
                             n_max=max(n_keep, 12), tol=1e-12)
    rows = ck.contraction_report(iterates, tuned)
    ratios = [r.ratio for r in rows if 2 <= r.n <= 8 and math.isfinite(r.ratio)]

    times = iterates[0].times
    dt = float(times[1] - times[0])
    traj = epsilon.run(state, dt, len(times) - 1, keep_states=True)
    final = iterates[-1]
    sup = 0.0
    for j, s in enumerate(traj.states):
        dr = final.rho[j] - s.rho
        dv = final.v(j) - s.v
        sup = max(sup, math.sqrt(l2_norm(dr) ** 2 + l2_norm(dv) ** 2))
    return ContractionStudy(eta=eta, rows=rows,
                            max_ratio=max(ratios) if ratios else float("inf"),
                            sup_l2_vs_rk4=sup)
