"""Finite-volume ionic Euler-Poisson solver and the electron velocity field."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import MacroState, SimConfig, SpatialGrid, bulk_velocity, flogf, spectral_derivative, wavenumbers
from .errors import VacuumBreach
from .poisson_boltzmann import Potential, dphi_dt, l2norm, solve_pb

RHO_FLOOR = 1e-8
ORDER2_CFL = 0.45
LOG_COLUMNS = ("t", "mass", "energy", "min_rho")
SNAP_COLUMNS = ("x", "rho", "u", "phi", "rho_e", "u_e")


@dataclass(frozen=True)
class FluidState:
    macro: MacroState
    potential: Potential
    time: float = 0.0

    @property
    def grid(self):
        return self.macro.grid


@dataclass(frozen=True)
class ElectronField:
    rho_e: np.ndarray
    u_e: np.ndarray
    continuity_residual: float
    dt_rho_e: np.ndarray
    flux: np.ndarray  # rho_e * u_e, the potential-gradient field v


def make_state(rho, m, grid: SpatialGrid, pb_tol=1e-10, phi0=None, time=0.0):
    macro = MacroState(rho, m, grid)
    if macro.rho.min() < RHO_FLOOR:
        raise VacuumBreach(f"density {macro.rho.min():.3e} below floor at t={time:.6g}")
    return FluidState(macro, solve_pb(macro.rho, grid, tol=pb_tol, phi0=phi0), time)


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _rusanov_divergence(rho, m, kappa, dx, order):
    """(F_{i+1/2} - F_{i-1/2}) / dx for the pair (rho, m)."""
    U = np.stack([rho, m])
    if order == 2:
        d = _minmod(U - np.roll(U, 1, axis=1), np.roll(U, -1, axis=1) - U)
        UL = U + 0.5 * d
        UR = np.roll(U - 0.5 * d, -1, axis=1)
    else:
        UL = U
        UR = np.roll(U, -1, axis=1)
    c = math.sqrt(kappa)

    def phys(V):
        u = V[1] / V[0]
        return np.stack([V[1], V[1] * u + kappa * V[0]]), np.abs(u) + c

    FL, sL = phys(UL)
    FR, sR = phys(UR)
    s = np.maximum(sL, sR)
    F = 0.5 * (FL + FR) - 0.5 * s * (UR - UL)
    return (F - np.roll(F, 1, axis=1)) / dx


def _check(rho, t):
    mn = float(rho.min())
    if not mn >= RHO_FLOOR:
        raise VacuumBreach(f"density {mn:.3e} below floor {RHO_FLOOR} at t={t:.6g}")


def max_speed(state: FluidState, kappa):
    return float(np.max(np.abs(bulk_velocity(state.macro)))) + math.sqrt(kappa)


def fluid_step(state: FluidState, dt, kappa, order=1, pb_tol=1e-10, cfl=0.9) -> FluidState:
    """Advance one step; order 1 is flux-then-source, order 2 is MUSCL + SSP-RK2."""
    grid = state.grid
    dx = grid.dx
    if max_speed(state, kappa) * dt / dx > cfl + 1e-12:
        raise ValueError(f"CFL violated: {max_speed(state, kappa) * dt / dx:.3f} > {cfl}")
    rho = np.array(state.macro.rho)
    m = np.array(state.macro.momentum)
    t1 = state.time + dt
    if order == 1:
        div = _rusanov_divergence(rho, m, kappa, dx, 1)
        rs = rho - dt * div[0]
        ms = m - dt * div[1]
        _check(rs, t1)
        pot = solve_pb(rs, grid, tol=pb_tol, phi0=state.potential.phi)
        ms = ms + dt * rs * pot.e_field
        return FluidState(MacroState(rs, ms, grid), pot, t1)

    def L(r, q, pot):
        div = _rusanov_divergence(r, q, kappa, dx, 2)
        return -div[0], -div[1] + r * pot.e_field

    a, b = L(rho, m, state.potential)
    r1, m1 = rho + dt * a, m + dt * b
    _check(r1, t1)
    p1 = solve_pb(r1, grid, tol=pb_tol, phi0=state.potential.phi)
    a, b = L(r1, m1, p1)
    r2 = 0.5 * (rho + r1 + dt * a)
    m2 = 0.5 * (m + m1 + dt * b)
    _check(r2, t1)
    pot = solve_pb(r2, grid, tol=pb_tol, phi0=p1.phi)
    return FluidState(MacroState(r2, m2, grid), pot, t1)


def fluid_total_energy(state: FluidState, kappa):
    rho = state.macro.rho
    m = state.macro.momentum
    phi = state.potential.phi
    dens = 0.5 * m**2 / rho + 0.5 * state.potential.e_field**2 + (phi - 1.0) * np.exp(phi) + 1.0
    if kappa > 0:
        dens = dens + kappa * flogf(rho)
    return float(dens.sum() * state.grid.dx)


def electron_velocity(state: FluidState) -> ElectronField:
    grid = state.grid
    phi = np.asarray(state.potential.phi)
    rho_e = np.exp(phi)
    dt_rho_e = rho_e * dphi_dt(state.macro, phi)
    # -psi'' = -dt_rho_e with zero mean, then v = -psi'
    k2 = wavenumbers(grid) ** 2
    h = np.fft.rfft(-dt_rho_e)
    h[0] = 0.0
    h[1:] /= k2[1:]
    psi = np.fft.irfft(h, n=grid.n_x)
    v = -spectral_derivative(psi, grid)
    u_e = v / rho_e
    res = l2norm(dt_rho_e + spectral_derivative(rho_e * u_e, grid), grid)
    return ElectronField(rho_e, u_e, res, dt_rho_e, v)


@dataclass
class FluidRun:
    snapshots: list
    electrons: list
    log: list
    dt: float
    steps: int

    def write_log(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(LOG_COLUMNS)
            for r in self.log:
                w.writerow([repr(float(x)) for x in r])


def _log_row(state, kappa):
    return (state.time, float(state.macro.rho.sum() * state.grid.dx),
            fluid_total_energy(state, kappa), float(state.macro.rho.min()))


def run_fluid(config: SimConfig, U0: MacroState, snapshot_every=None, order=1, electrons=True) -> FluidRun:
    """Fixed-dt loop; ``config.dt`` is the requested step (else a CFL step)."""
    kappa = config.kappa
    grid = U0.grid
    state = make_state(U0.rho, U0.momentum, grid, config.pb_tol)
    if config.dt:
        dt_req = config.dt
    else:
        # MUSCL + SSP-RK2 stays TVD only up to CFL 1/2; past that the limiter clips to first order
        target = config.dt_cfl_factor if order == 1 else min(config.dt_cfl_factor, ORDER2_CFL)
        dt_req = target * grid.dx / max(max_speed(state, kappa), 1e-12)
    steps = max(1, math.ceil(config.t_end / dt_req - 1e-9))
    dt = config.t_end / steps
    every = snapshot_every or config.snapshot_every or steps
    snaps = [state]
    elec = [electron_velocity(state)] if electrons else []
    log = [_log_row(state, kappa)]
    for n in range(1, steps + 1):
        # dt_cfl_factor is the target at t = 0; the hard limit is the stability bound 1
        state = fluid_step(state, dt, kappa, order, config.pb_tol, 1.0)
        state = FluidState(state.macro, state.potential, n * dt)
        log.append(_log_row(state, kappa))
        if n % every == 0 or n == steps:
            if snaps[-1].time != state.time:
                snaps.append(state)
                if electrons:
                    elec.append(electron_velocity(state))
    return FluidRun(snaps, elec, log, dt, steps)


def write_fluid_snapshot(path, state: FluidState, efield: ElectronField | None = None):
    if efield is None:
        efield = electron_velocity(state)
    cols = [state.grid.x, state.macro.rho, bulk_velocity(state.macro), state.potential.phi,
            efield.rho_e, efield.u_e]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SNAP_COLUMNS)
        for row in zip(*cols):
            w.writerow([repr(float(x)) for x in row])
