"""Relative entropies, modulated energy and the inequalities they satisfy."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import (
    Distribution,
    MacroState,
    SpatialGrid,
    _frozen,
    bulk_velocity,
    flogf,
    moments,
    spectral_derivative,
)
from .errors import MassMismatch, NonpositiveReference

MASS_TOL = 1e-10
REPORT_COLUMNS = ("t", "kinetic_term", "pressure_term", "field_term", "electron_term", "total")

# Regression constants, fitted once by fit_critical_constant / fit_pb_stability_constant
# on the seed-0 families below and frozen here.
CRITICAL_TERM_C = 0.3299453243
PB_STABILITY_C = 0.0237739559


@dataclass(frozen=True)
class AugmentedState:
    """(rho, m, E = -phi', rho_e = exp(phi)) on one spatial grid."""

    rho: np.ndarray
    momentum: np.ndarray
    e_field: np.ndarray
    rho_e: np.ndarray
    grid: SpatialGrid

    def __post_init__(self):
        for name in ("rho", "momentum", "e_field", "rho_e"):
            a = _frozen(getattr(self, name))
            if a.shape != (self.grid.n_x,):
                raise ValueError(f"{name} does not match the grid")
            object.__setattr__(self, name, a)
        if self.rho.min() < 0:
            raise ValueError("rho must be nonnegative")
        if self.rho_e.min() <= 0:
            raise ValueError("rho_e must be positive")

    @property
    def macro(self):
        return MacroState(self.rho, self.momentum, self.grid)

    @classmethod
    def from_fields(cls, macro: MacroState, potential):
        return cls(macro.rho, macro.momentum, potential.e_field, np.exp(potential.phi), macro.grid)


@dataclass(frozen=True)
class ModulatedEnergyReport:
    kinetic_term: float
    pressure_term: float
    field_term: float
    electron_term: float
    time: float = 0.0

    @property
    def total(self):
        return self.kinetic_term + self.pressure_term + self.field_term + self.electron_term

    def row(self):
        return (self.time, self.kinetic_term, self.pressure_term, self.field_term, self.electron_term, self.total)


def write_reports(path, reports):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            w.writerow([repr(float(x)) for x in r.row()])


def _grid_of(a, grid):
    return grid if grid is not None else SpatialGrid(np.asarray(a).size)


def relative_pressure_density(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return flogf(p) - p * np.log(q) - p + q


def relative_pressure(p, q, grid: SpatialGrid | None = None):
    """Integral of P(p|q) = p log(p/q) - p + q."""
    q = np.asarray(q, dtype=float)
    if q.min() <= 0:
        raise NonpositiveReference(f"reference density has min {q.min():.3e}")
    grid = _grid_of(q, grid)
    return float(relative_pressure_density(p, q).sum() * grid.dx)


def modulated_energy(trial: AugmentedState, reference: AugmentedState, kappa, time=0.0) -> ModulatedEnergyReport:
    grid = reference.grid
    if trial.grid != grid:
        raise ValueError("states live on different grids")
    if reference.rho.min() <= 0:
        raise NonpositiveReference("reference density must be positive")
    dx = grid.dx
    ut = bulk_velocity(trial.macro)
    u = reference.momentum / reference.rho
    kin = float(0.5 * np.sum(trial.rho * (ut - u) ** 2) * dx)
    pres = kappa * relative_pressure(trial.rho, reference.rho, grid) if kappa > 0 else 0.0
    fld = float(0.5 * np.sum((trial.e_field - reference.e_field) ** 2) * dx)
    phit = np.log(trial.rho_e)
    phi = np.log(reference.rho_e)
    ele = float(np.sum(trial.rho_e * (phit - phi) - (trial.rho_e - reference.rho_e)) * dx)
    return ModulatedEnergyReport(kin, pres, fld, ele, time)


def l1_density_bound(rho1, rho2, grid: SpatialGrid | None = None):
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    grid = _grid_of(rho1, grid)
    lhs = float(np.abs(rho1 - rho2).sum() * grid.dx)
    tot = float((rho1 + rho2).sum() * grid.dx)
    rel = max(relative_pressure(rho1, rho2, grid), 0.0)
    return lhs, float(np.sqrt(2.0 * tot * rel))


def momentum_error_bounds(trialU: MacroState, refU: MacroState, u_ref_sup=None):
    """((lhs, rhs) for rho u, (lhs, rhs) for rho u u) in L1."""
    grid = refU.grid
    dx = grid.dx
    ut = bulk_velocity(trialU)
    u = bulk_velocity(refU)
    usup = float(np.max(np.abs(u))) if u_ref_sup is None else float(u_ref_sup)
    rt, r = trialU.rho, refU.rho
    mass_t = float(rt.sum() * dx)
    kin = float(np.sum(rt * (ut - u) ** 2) * dx)
    drho = float(np.abs(rt - r).sum() * dx)
    lhs1 = float(np.abs(rt * ut - r * u).sum() * dx)
    rhs1 = np.sqrt(mass_t * kin) + usup * drho
    lhs2 = float(np.abs(rt * ut**2 - r * u**2).sum() * dx)
    rhs2 = kin + 2.0 * np.sqrt(mass_t * kin) * usup + drho * usup**2
    return (lhs1, float(rhs1)), (lhs2, float(rhs2))


def log_maxwellian(rho, u, kappa, v):
    """log M_kappa^(rho,u) from the closed form (no discrete renormalisation)."""
    rho = np.asarray(rho, dtype=float)[:, None]
    u = np.asarray(u, dtype=float)[:, None]
    return np.log(rho) - 0.5 * np.log(2.0 * np.pi * kappa) - (v[None, :] - u) ** 2 / (2.0 * kappa)


def kl_to_maxwellian(f: Distribution, rho, u, kappa):
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    vals = f.values
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (f.xgrid.n_x,))
    u = np.broadcast_to(np.asarray(u, dtype=float), (f.xgrid.n_x,))
    dens = flogf(vals) - vals * log_maxwellian(rho, u, kappa, f.vgrid.v)
    return float(dens.sum() * f.xgrid.dx * f.vgrid.dv)


def kl_decomposition(f: Distribution, rho, u, kappa):
    """Both sides of KL(f|M(rho,u)) = KL(f|M(rho_f,u_f)) + int rho_f log(rho_f/rho) + int rho_f|u_f-u|^2/2kappa."""
    mac = moments(f)
    rt = mac.rho
    ut = bulk_velocity(mac)
    lhs = kl_to_maxwellian(f, rho, u, kappa)
    dx = f.xgrid.dx
    rhs = (kl_to_maxwellian(f, rt, ut, kappa)
           + float(np.sum(flogf(rt) - rt * np.log(rho)) * dx)
           + float(np.sum(rt * (ut - u) ** 2) * dx) / (2.0 * kappa))
    return lhs, rhs


def _score(vals, dv):
    """d/dv log f by centred differences (one-sided at the ends); exact for Gaussians."""
    lg = np.log(np.maximum(vals, 1e-300))
    s = np.empty_like(lg)
    s[:, 1:-1] = (lg[:, 2:] - lg[:, :-2]) / (2.0 * dv)
    s[:, 0] = (lg[:, 1] - lg[:, 0]) / dv
    s[:, -1] = (lg[:, -1] - lg[:, -2]) / dv
    return s


def fisher_dissipation(f: Distribution, u, kappa, floor=1e-30):
    """Integral of |kappa f_v - (u - v) f|^2 / f with a log-gradient score."""
    vals = f.values
    v = f.vgrid.v[None, :]
    score = kappa * _score(vals, f.vgrid.dv) + (v - np.asarray(u)[:, None])
    dens = np.where(vals > floor, vals * score**2, 0.0)
    return float(dens.sum() * f.xgrid.dx * f.vgrid.dv)


def log_sobolev_check(f: Distribution, u, kappa):
    mac = moments(f)
    lhs = kappa * kl_to_maxwellian(f, mac.rho, u, kappa)
    rhs = 0.5 * fisher_dissipation(f, u, kappa)
    return lhs, rhs


def _mass(f: Distribution):
    return float(f.values.sum() * f.xgrid.dx * f.vgrid.dv)


def csiszar_kullback_check(f: Distribution, g: Distribution):
    mf, mg = _mass(f), _mass(g)
    if abs(mf - mg) > MASS_TOL * max(1.0, abs(mf)):
        raise MassMismatch(f"masses differ: {mf!r} vs {mg!r}")
    fv, gv = f.values, g.values
    if np.any((fv > 0) & (gv <= 0)):
        raise NonpositiveReference("g vanishes where f does not")
    cell = f.xgrid.dx * f.vgrid.dv
    lhs = float(np.abs(fv - gv).sum() * cell) ** 2
    pos = fv > 0
    kl = float(np.sum(fv[pos] * np.log(fv[pos] / gv[pos])) * cell)
    return lhs, 2.0 * mf * kl


def w1_distance_1d(mu, nu, grid: SpatialGrid | None = None):
    """Periodic 1D Wasserstein-1 distance between equal-mass densities."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    grid = _grid_of(mu, grid)
    dx = grid.dx
    diff = (mu - nu) * dx
    if abs(diff.sum()) > MASS_TOL * max(1.0, float(np.abs(mu).sum() * dx)):
        raise MassMismatch(f"mass difference {diff.sum():.3e}")
    D = np.cumsum(diff)
    return float(np.abs(D - np.median(D)).sum() * dx)


@dataclass(frozen=True)
class PhaseSpaceBound:
    """Upper bound for d_BL(f, rho delta(v - u)) split into its three pieces."""

    moment_term: float
    velocity_term: float
    w1_term: float
    constant: float

    @property
    def total(self):
        return self.moment_term + self.velocity_term + self.w1_term


def lipschitz_constant(u, grid: SpatialGrid):
    u = np.asarray(u, dtype=float)
    return 1.0 + float(np.max(np.abs(u))) + float(np.max(np.abs(spectral_derivative(u, grid))))


def dbl_macro_bounds(trialU: MacroState, rho, u):
    """(d_BL surrogate for rho, bound for rho u, bound for rho u u) via W1."""
    grid = trialU.grid
    dx = grid.dx
    ut = bulk_velocity(trialU)
    C = lipschitz_constant(u, grid)
    w1 = w1_distance_1d(trialU.rho, rho, grid)
    mass_t = float(trialU.rho.sum() * dx)
    kin = float(np.sum(trialU.rho * (ut - u) ** 2) * dx)
    mom = np.sqrt(mass_t * kin) + C * w1
    flux = kin + C * np.sqrt(mass_t * kin) + C * w1
    return w1, float(mom), float(flux)


def dbl_phase_space(f: Distribution, rho, u) -> PhaseSpaceBound:
    mac = moments(f)
    grid = f.xgrid
    dx = grid.dx
    ut = bulk_velocity(mac)
    mass_t = float(mac.rho.sum() * dx)
    spread = float((f.values * (f.vgrid.v[None, :] - ut[:, None]) ** 2).sum() * dx * f.vgrid.dv)
    kin = float(np.sum(mac.rho * (ut - u) ** 2) * dx)
    C = lipschitz_constant(u, grid)
    w1 = w1_distance_1d(mac.rho, rho, grid)
    s = np.sqrt(mass_t)
    return PhaseSpaceBound(s * np.sqrt(spread), s * np.sqrt(kin), C * w1, C)


def critical_term_check(rho_e_trial, rho_e_ref, u_bar, phi_trial, phi_ref, grid: SpatialGrid | None = None):
    rho_e_ref = np.asarray(rho_e_ref, dtype=float)
    grid = _grid_of(rho_e_ref, grid)
    dphi = spectral_derivative(np.asarray(phi_trial) - np.asarray(phi_ref), grid)
    lhs = abs(float(np.sum((np.asarray(rho_e_trial) - rho_e_ref) * np.asarray(u_bar) * dphi) * grid.dx))
    rhs_p = relative_pressure(rho_e_trial, rho_e_ref, grid)
    rhs_g = float(np.sum(dphi**2) * grid.dx)
    return lhs, rhs_p, rhs_g


# --- randomized families for the fitted constants ----------------------------


def smooth_field(rng, grid: SpatialGrid, modes=4, decay=1.0):
    """Random real trigonometric polynomial with zero mean and sup-norm 1."""
    x = grid.x / grid.length
    out = np.zeros(grid.n_x)
    for k in range(1, modes + 1):
        a, b = rng.standard_normal(2) / k**decay
        out += a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)
    return out / np.max(np.abs(out))


def critical_term_ratios(seed=0, draws=200, amplitudes=(1e-1, 1e-2), n_x=64):
    """lhs / (rhs_P + rhs_grad) over a seed-fixed family, shape (len(amplitudes), draws)."""
    from .poisson_boltzmann import solve_pb

    rng = np.random.default_rng(seed)
    grid = SpatialGrid(n_x)
    out = np.empty((len(amplitudes), draws))
    for d in range(draws):
        rho = 1.0 + 0.3 * smooth_field(rng, grid)
        pert = smooth_field(rng, grid)
        ubar = smooth_field(rng, grid)
        ref = solve_pb(rho, grid)
        for i, amp in enumerate(amplitudes):
            tri = solve_pb(rho * (1.0 + amp * pert), grid)
            lhs, rp, rg = critical_term_check(np.exp(tri.phi), np.exp(ref.phi), ubar, tri.phi, ref.phi, grid)
            out[i, d] = lhs / (rp + rg)
    return out


def fit_critical_constant(seed=0, **kw):
    return float(critical_term_ratios(seed, **kw).max())


def pb_stability_ratios(seed=0, draws=100, n_x=64):
    from .poisson_boltzmann import stability_check

    rng = np.random.default_rng(seed)
    grid = SpatialGrid(n_x)
    out = []
    for _ in range(draws):
        rho1 = 1.0 + 0.3 * smooth_field(rng, grid)
        kind = rng.integers(2)
        if kind == 0:
            rho2 = rho1 + 0.05 * smooth_field(rng, grid)
        else:
            c = 1.0 + 0.2 * rng.random()
            rho2 = c * np.roll(rho1, int(rng.integers(1, grid.n_x)))
        lhs, rhs = stability_check(rho1, rho2, grid)
        out.append(lhs / rhs)
    return np.array(out)


def fit_pb_stability_constant(seed=0, **kw):
    return float(pb_stability_ratios(seed, **kw).max())
