"""Strang-split integrator for the ionic VPFP system on a 1D phase-space grid."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import (
    Distribution,
    SimConfig,
    SpatialGrid,
    VelocityGrid,
    bulk_velocity,
    kinetic_entropy_H,
    moments,
    regularized_bulk_velocity,
)
from .errors import AbortOnLeak, TridiagonalFailure
from .poisson_boltzmann import Potential, mollify, solve_pb

KAPPA_FLOOR = 1e-12  # times dv^2, used when kappa == 0
F_FLOOR = 1e-30
DIAG_COLUMNS = ("t", "mass", "momentum", "second_moment", "energy", "cum_dissipation", "leak")


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Append-only time series; ``rows`` holds tuples in DIAG_COLUMNS order."""

    rows: tuple = ()

    def append(self, row):
        return DiagnosticsRecord(self.rows + (tuple(float(x) for x in row),))

    def column(self, name):
        i = DIAG_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows])

    def kei_series(self, tau):
        """E(t) + cumulative dissipation / tau."""
        return self.column("energy") + self.column("cum_dissipation") / tau

    def kei_violation(self, tau):
        """Largest single-step increase of the KEI monitor (<= 0 when monotone)."""
        q = self.kei_series(tau)
        if q.size < 2:
            return 0.0
        return float(np.max(np.diff(q)))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(DIAG_COLUMNS)
            for r in self.rows:
                w.writerow([repr(x) for x in r])


@dataclass(frozen=True)
class KineticState:
    f: Distribution
    potential: Potential
    time: float = 0.0
    diagnostics: DiagnosticsRecord = field(default_factory=DiagnosticsRecord)
    cum_dissipation: float = 0.0
    leak: float = 0.0


# --- substeps ----------------------------------------------------------------


def step_transport_x(f: Distribution, dt):
    """Conservative semi-Lagrangian shift of every velocity row by v_j dt."""
    shifts = f.vgrid.v * dt / f.xgrid.dx
    rows = np.ascontiguousarray(f.values.T)
    out = kernels.pfc_shift_periodic(rows, shifts)
    return f.with_values(np.maximum(out.T, 0.0))


def step_accel_v(f: Distribution, e_field, dt, exact_momentum=True):
    """Shift every x-column by E_i dt in velocity; returns (f', leaked mass).

    The limited PFC fluxes do not move the mean velocity by exactly E dt on
    under-resolved (cold) profiles, so by default each cell's momentum is then
    set to its exact value with a mass-neutral upwind shift.
    """
    e_field = np.asarray(e_field, dtype=float)
    if not np.any(e_field):
        return f, 0.0
    dv = f.vgrid.dv
    shifts = e_field * dt / dv
    out, leak = kernels.pfc_shift_open(f.values, shifts)
    out = np.maximum(out, 0.0)
    if exact_momentum:
        v = f.vgrid.v
        rho0 = f.values.sum(axis=1) * dv
        rho1 = out.sum(axis=1) * dv
        m0 = f.values @ v * dv
        live = rho0 > 0
        scale = np.where(live, rho1 / np.where(live, rho0, 1.0), 0.0)
        target = scale * m0 + dt * e_field * rho1
        out = _momentum_fix(out, target - out @ v * dv, dv)
    return f.with_values(out), float(leak.sum() * f.xgrid.dx * dv)


def bernoulli(w):
    """B(w) = w / (exp(w) - 1), with B(0) = 1."""
    w = np.asarray(w, dtype=float)
    out = np.ones_like(w)
    nz = w != 0.0
    with np.errstate(over="ignore"):
        out[nz] = w[nz] / np.expm1(w[nz])
    return out


def chang_cooper_weights(u, kappa, vgrid: VelocityGrid):
    """Face coefficients (cp, cm) with J_{j+1/2} = cm f_{j+1} - cp f_j.

    Flux J = kappa f_v + (v - u) f. Shapes (n_x, n_v - 1).
    """
    dv = vgrid.dv
    k = max(kappa, KAPPA_FLOOR * dv * dv)
    a = (vgrid.v[:-1] + 0.5 * dv)[None, :] - np.asarray(u)[:, None]
    w = a * dv / k
    return k / dv * bernoulli(w), k / dv * bernoulli(-w)


def collision_matrix(cp, cm, h, dv, out_p=None, out_m=None):
    """Tridiagonal bands of I - h * (discrete N) for zero-flux boundaries.

    ``out_p``/``out_m`` are the outflow weights on the diagonal; flux form
    (hence mass conservation) means they equal ``cp``/``cm``.
    """
    m, nf = cp.shape
    n = nf + 1
    r = h / dv
    out_p = cp if out_p is None else out_p
    out_m = cm if out_m is None else out_m
    diag = np.ones((m, n))
    diag[:, :-1] += r * out_p
    diag[:, 1:] += r * out_m
    upper = np.zeros((m, n))
    upper[:, :-1] = -r * cm
    lower = np.zeros((m, n))
    lower[:, 1:] = -r * cp
    return lower, diag, upper


def _momentum_fix(vals, dm, dv):
    """Upwind velocity shift restoring per-cell momentum by dm (mass-neutral)."""
    rho = vals.sum(axis=1) * dv
    out = vals.copy()
    pos = dm > 0
    neg = dm < 0
    if np.any(pos):
        s = dm[pos] / (dv * (rho[pos] - dv * vals[pos, -1]))
        g = vals[pos]
        flux = s[:, None] * g[:, :-1]
        out[pos, :-1] -= flux
        out[pos, 1:] += flux
    if np.any(neg):
        s = -dm[neg] / (dv * (rho[neg] - dv * vals[neg, 0]))
        g = vals[neg]
        flux = s[:, None] * g[:, 1:]
        out[neg, 1:] -= flux
        out[neg, :-1] += flux
    return out


def collision_solve(f: Distribution, kappa, h, epsilon=0.0, weights=None):
    """Raw implicit solve of (I - h N_kappa) g = f, before any cleanup.

    ``weights`` replaces ``chang_cooper_weights``; it may return (cp, cm) or
    (cp, cm, out_p, out_m), the latter being how faults are injected.
    Returns (values, macro of f).
    """
    vg = f.vgrid
    macro = moments(f)
    u = regularized_bulk_velocity(macro, epsilon) if epsilon > 0 else bulk_velocity(macro)
    w = (weights or chang_cooper_weights)(u, kappa, vg)
    lower, diag, upper = collision_matrix(*w[:2], h, vg.dv, *w[2:])
    new, ok = kernels.thomas_batched(lower, diag, upper, f.values)
    if not ok or not np.all(np.isfinite(new)):
        raise TridiagonalFailure("singular collision system")
    return new, macro


def step_collision(f: Distribution, kappa, tau, dt, epsilon=0.0, weights=None):
    """Implicit Chang-Cooper step of (dt/tau) N_kappa with frozen bulk velocity.

    The per-cell mass rescale only removes roundoff from the solve; the
    momentum fix (skipped under the stabilizer) restores the frozen u.
    """
    vg = f.vgrid
    dv = vg.dv
    new, macro = collision_solve(f, kappa, dt / tau, epsilon, weights)
    new = np.maximum(new, 0.0)
    rho0 = macro.rho
    rho1 = new.sum(axis=1) * dv
    live = rho1 > 0
    new[live] *= (rho0[live] / rho1[live])[:, None]
    if epsilon == 0.0:
        m1 = new @ vg.v * dv
        new = _momentum_fix(new, macro.momentum - m1, dv)
    return f.with_values(new)


# --- functionals ----------------------------------------------------------------


def potential_energy(phi, e_field, grid: SpatialGrid):
    phi = np.asarray(phi)
    dens = 0.5 * np.asarray(e_field) ** 2 + (phi - 1.0) * np.exp(phi) + 1.0
    return float(dens.sum() * grid.dx)


def energy_functional(f: Distribution, phi, kappa, e_field=None):
    from .poisson_boltzmann import electric_field

    if e_field is None:
        e_field = electric_field(phi, f.xgrid)
    return kinetic_entropy_H(f, kappa) + potential_energy(phi, e_field, f.xgrid)


def dissipation(f: Distribution, kappa, u=None):
    """Discrete integral of |kappa f_v - (u - v) f|^2 / f over phase space.

    Uses the Chang-Cooper face fluxes paired with the discrete gradient of
    kappa log f + (v - u)^2 / 2; faces touching cells below F_FLOOR are skipped.
    """
    vg = f.vgrid
    dv = vg.dv
    vals = f.values
    if u is None:
        u = bulk_velocity(moments(f))
    if kappa == 0:
        return float(((vg.v[None, :] - np.asarray(u)[:, None]) ** 2 * vals).sum() * f.xgrid.dx * dv)
    cp, cm = chang_cooper_weights(u, kappa, vg)
    lo = vals[:, :-1]
    hi = vals[:, 1:]
    live = (lo > F_FLOOR) & (hi > F_FLOOR)
    flux = cm * hi - cp * lo
    a = (vg.v[:-1] + 0.5 * dv)[None, :] - np.asarray(u)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        grad = kappa * np.log(np.where(live, hi, 1.0) / np.where(live, lo, 1.0)) + a * dv
    return float(np.sum(np.where(live, flux * grad, 0.0)) * f.xgrid.dx)


def second_moment(f: Distribution):
    return float((f.values @ f.vgrid.v**2).sum() * f.xgrid.dx * f.vgrid.dv)


def total_momentum(f: Distribution):
    return float((f.values @ f.vgrid.v).sum() * f.xgrid.dx * f.vgrid.dv)


def _diag_row(state: KineticState, kappa):
    f = state.f
    pot = state.potential
    return (
        state.time,
        f.mass,
        total_momentum(f),
        second_moment(f),
        energy_functional(f, pot.phi, kappa, pot.e_field),
        state.cum_dissipation,
        state.leak,
    )


def initial_state(f0: Distribution, config: SimConfig) -> KineticState:
    pot = _field(f0, config, None)
    st = KineticState(f0, pot, 0.0)
    return KineticState(f0, pot, 0.0, DiagnosticsRecord().append(_diag_row(st, config.kappa)))


def _field(f: Distribution, config: SimConfig, phi0):
    rho = moments(f).rho
    eps = config.stabilizer_epsilon
    if eps > 0:
        rho = mollify(rho, f.xgrid, eps)
    pot = solve_pb(rho, f.xgrid, tol=config.pb_tol, phi0=phi0)
    if eps > 0:
        pot = Potential(pot.phi, mollify(pot.e_field, f.xgrid, eps), pot.residual_norm, pot.grid,
                        pot.iterations, pot.history)
    return pot


def vpfp_step(state: KineticState, dt, config: SimConfig, collision=None) -> KineticState:
    """One Strang step: x/2, v/2, collision, v/2, x/2, then refresh the potential."""
    kappa, tau = config.kappa, config.tau
    collide = collision or step_collision
    f = step_transport_x(state.f, 0.5 * dt)
    pot = _field(f, config, state.potential.phi)
    f, l1 = step_accel_v(f, pot.e_field, 0.5 * dt)
    f = collide(f, kappa, tau, dt, config.stabilizer_epsilon)
    d = dissipation(f, kappa)
    f, l2 = step_accel_v(f, pot.e_field, 0.5 * dt)
    f = step_transport_x(f, 0.5 * dt)
    pot = _field(f, config, pot.phi)
    leak = state.leak + l1 + l2
    mass0 = state.diagnostics.rows[0][1] if state.diagnostics.rows else f.mass + leak
    if leak > config.boundary_mass_tol * mass0:
        raise AbortOnLeak(f"velocity boundary leaked {leak:.3e} of mass {mass0:.6g} at t={state.time + dt:.6g}")
    new = KineticState(f, pot, state.time + dt, state.diagnostics, state.cum_dissipation + dt * d, leak)
    return KineticState(f, pot, new.time, state.diagnostics.append(_diag_row(new, kappa)),
                        new.cum_dissipation, leak)


def stable_dt(f: Distribution, e_field, cfl):
    emax = float(np.max(np.abs(e_field))) if np.size(e_field) else 0.0
    lim = f.xgrid.dx / f.vgrid.v_max
    if emax > 0:
        lim = min(lim, f.vgrid.dv / emax)
    return cfl * lim


@dataclass
class KineticRun:
    snapshots: list
    final: KineticState
    dt: float
    steps: int

    @property
    def diagnostics(self):
        return self.final.diagnostics


def run_kinetic(config: SimConfig, f0: Distribution, snapshot_every=None, collision=None) -> KineticRun:
    """Fixed-step integration to ``config.t_end``.

    ``config.dt`` (when set) is the requested step; it is shrunk so that an
    integer number of steps lands exactly on t_end. Snapshots are taken every
    ``snapshot_every`` steps (and always at t = 0 and t_end).
    """
    state = initial_state(f0, config)
    dt_req = config.dt if config.dt else stable_dt(f0, state.potential.e_field, config.dt_cfl_factor)
    steps = max(1, math.ceil(config.t_end / dt_req - 1e-9))
    dt = config.t_end / steps
    every = snapshot_every or config.snapshot_every or steps
    snaps = [state]
    for n in range(1, steps + 1):
        state = vpfp_step(state, dt, config, collision)
        if n % every == 0 or n == steps:
            if snaps[-1] is not state:
                snaps.append(state)
    return KineticRun(snaps, state, dt, steps)
