"""Grids, phase-space densities, moments, Maxwellians and entropies (d = 1)."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import GridTooSmall

VACUUM_FLOOR = 1e-14
LOG_CLAMP = 1e-300
SNAP_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpatialGrid:
    n_x: int
    length: float = 1.0

    def __post_init__(self):
        if int(self.n_x) != self.n_x or self.n_x < 4:
            raise ValueError("n_x must be an integer >= 4")
        if not self.length > 0:
            raise ValueError("length must be positive")

    @property
    def dx(self):
        return self.length / self.n_x

    @property
    def x(self):
        return (np.arange(self.n_x) + 0.5) * self.dx

    def integrate(self, field_):
        return float(np.sum(field_) * self.dx)


@dataclass(frozen=True)
class VelocityGrid:
    n_v: int
    v_max: float

    def __post_init__(self):
        if int(self.n_v) != self.n_v or self.n_v < 8:
            raise ValueError("n_v must be an integer >= 8")
        if not self.v_max > 0:
            raise ValueError("v_max must be positive")

    @property
    def dv(self):
        return 2.0 * self.v_max / self.n_v

    @property
    def v(self):
        # built symmetrically so that v[n-1-j] == -v[j] holds bit-exactly
        half = (np.arange(self.n_v // 2, self.n_v) + 0.5 - self.n_v / 2) * self.dv
        if self.n_v % 2:
            return np.concatenate([-half[:0:-1], half])
        return np.concatenate([-half[::-1], half])


@dataclass(frozen=True)
class Distribution:
    """Phase-space density on an x-outer, v-inner tensor grid."""

    values: np.ndarray
    xgrid: SpatialGrid
    vgrid: VelocityGrid

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.xgrid.n_x, self.vgrid.n_v):
            raise ValueError(f"values shape {vals.shape} does not match grids")
        if not np.all(np.isfinite(vals)) or vals.min(initial=0.0) < 0.0:
            raise ValueError("distribution must be finite and nonnegative")
        object.__setattr__(self, "values", vals)

    @property
    def mass(self):
        return float(self.values.sum() * self.xgrid.dx * self.vgrid.dv)

    def boundary_mass(self):
        """Mass sitting in the two outermost velocity cells."""
        edge = self.values[:, 0].sum() + self.values[:, -1].sum()
        return float(edge * self.xgrid.dx * self.vgrid.dv)

    def with_values(self, values):
        return Distribution(values, self.xgrid, self.vgrid)


@dataclass(frozen=True)
class MacroState:
    rho: np.ndarray
    momentum: np.ndarray
    grid: SpatialGrid

    def __post_init__(self):
        rho = _frozen(self.rho)
        m = _frozen(self.momentum)
        if rho.shape != (self.grid.n_x,) or m.shape != rho.shape:
            raise ValueError("macro fields must match the spatial grid")
        if rho.min() < 0.0:
            raise ValueError("density must be nonnegative")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "momentum", m)

    @classmethod
    def from_velocity(cls, rho, u, grid):
        rho = np.asarray(rho, dtype=float)
        return cls(rho, rho * np.asarray(u, dtype=float), grid)


@dataclass(frozen=True)
class SimConfig:
    kappa: float = 1.0
    tau: float = 0.05
    t_end: float = 0.2
    dt_cfl_factor: float = 0.9
    stabilizer_epsilon: float = 0.0
    pb_tol: float = 1e-10
    energy_tol: float = 1e-6
    boundary_mass_tol: float = 1e-8
    seed: int = 0
    dt: float | None = None
    n_x: int = 64
    n_v: int = 128
    v_max: float = 8.0
    length: float = 1.0
    snapshot_every: int = 0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.kappa >= 0:
            raise ValueError("kappa must be nonnegative")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.stabilizer_epsilon < 0:
            raise ValueError("stabilizer_epsilon must be nonnegative")


# --- spectral helpers on the periodic grid -------------------------------


def wavenumbers(grid: SpatialGrid):
    return 2.0 * np.pi * np.fft.rfftfreq(grid.n_x, d=grid.dx)


def spectral_derivative(a, grid: SpatialGrid):
    k = wavenumbers(grid)
    ah = np.fft.rfft(a)
    dh = 1j * k * ah
    if grid.n_x % 2 == 0:
        dh[-1] = 0.0
    return np.fft.irfft(dh, n=grid.n_x)


def spectral_laplacian(a, grid: SpatialGrid):
    k = wavenumbers(grid)
    return np.fft.irfft(-(k**2) * np.fft.rfft(a), n=grid.n_x)


def fourier_resample(a, n_new):
    """Band-limited resampling of a periodic cell-centred field.

    Nyquist modes of both grids are dropped, which is harmless for the smooth
    fields this is used on.
    """
    a = np.asarray(a, dtype=float)
    n = a.size
    if n_new == n:
        return a.copy()
    ah = np.fft.rfft(a) * np.exp(-1j * np.pi * np.arange(n // 2 + 1) / n)
    if n % 2 == 0:
        ah[-1] = 0.0
    m = n_new // 2 + 1
    out = np.zeros(m, dtype=complex)
    keep = min(m, ah.size)
    out[:keep] = ah[:keep]
    if n_new % 2 == 0:
        out[-1] = 0.0
    out *= np.exp(1j * np.pi * np.arange(m) / n_new)
    return np.fft.irfft(out, n=n_new) * (n_new / n)


# --- moments ------------------------------------------------------------


def moments(f: Distribution) -> MacroState:
    dv = f.vgrid.dv
    rho = f.values.sum(axis=1) * dv
    m = f.values @ f.vgrid.v * dv
    return MacroState(rho, m, f.xgrid)


def bulk_velocity(macro: MacroState, vacuum_floor=VACUUM_FLOOR):
    rho = macro.rho
    ok = rho > vacuum_floor
    u = np.zeros_like(rho)
    u[ok] = macro.momentum[ok] / rho[ok]
    return u


def regularized_bulk_velocity(macro: MacroState, epsilon):
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if epsilon == 0:
        return bulk_velocity(macro)
    m = macro.momentum
    return m / (macro.rho + epsilon * (1.0 + np.abs(m)))


def maxwellian(rho, u, kappa, vgrid: VelocityGrid, xgrid: SpatialGrid | None = None) -> Distribution:
    """Local Maxwellian M_kappa^(rho, u) sampled on the grid.

    For kappa > 0 each x-cell is rescaled so its discrete mass equals rho
    exactly. For kappa = 0 the mass of each cell is split linearly between
    the two velocity cells bracketing u, so the discrete mean is exactly u.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    u = np.broadcast_to(np.asarray(u, dtype=float), rho.shape).copy()
    if xgrid is None:
        xgrid = SpatialGrid(rho.size)
    if np.any(rho < 0):
        raise ValueError("rho must be nonnegative")
    v = vgrid.v
    dv = vgrid.dv
    if kappa > 0:
        if vgrid.v_max**2 < 40.0 * kappa + np.max(u**2):
            raise GridTooSmall(
                f"v_max={vgrid.v_max} too small for kappa={kappa}, max|u|={np.abs(u).max():.3g}"
            )
        shape = np.exp(-((v[None, :] - u[:, None]) ** 2) / (2.0 * kappa))
        norm = shape.sum(axis=1) * dv
        vals = rho[:, None] * shape / norm[:, None]
        return Distribution(vals, xgrid, vgrid)
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    s = (u - v[0]) / dv
    if np.any(s < 0) or np.any(s > vgrid.n_v - 1):
        raise GridTooSmall("monokinetic velocity outside the resolved velocity range")
    j = np.floor(s).astype(int)
    w = s - j
    snap_hi = w > 1.0 - SNAP_TOL
    j[snap_hi] += 1
    w[snap_hi] = 0.0
    w[w < SNAP_TOL] = 0.0
    j = np.minimum(j, vgrid.n_v - 1)
    vals = np.zeros((rho.size, vgrid.n_v))
    rows = np.arange(rho.size)
    vals[rows, j] = rho * (1.0 - w) / dv
    upper = w > 0
    vals[rows[upper], j[upper] + 1] = rho[upper] * w[upper] / dv
    return Distribution(vals, xgrid, vgrid)


def flogf(values):
    """f log f with the 0 log 0 = 0 convention."""
    return values * np.log(np.maximum(values, LOG_CLAMP))


def kinetic_entropy_H(f: Distribution, kappa):
    v = f.vgrid.v
    vals = f.values
    dens = 0.5 * (v**2)[None, :] * vals
    if kappa > 0:
        dens = dens + kappa * (flogf(vals) + 0.5 * np.log(2.0 * np.pi * kappa) * vals)
    return float(dens.sum() * f.xgrid.dx * f.vgrid.dv)


def macroscopic_entropy_eta(macro: MacroState, kappa):
    rho = macro.rho
    u = bulk_velocity(macro)
    dens = 0.5 * rho * u**2
    if kappa > 0:
        dens = dens + kappa * flogf(rho)
    return float(dens.sum() * macro.grid.dx)


def flogf_constant(c, vgrid: VelocityGrid):
    """Grid version of the constant C_{c,1} in the f log f lower bound.

    Sum of two pieces: the tail |v| >= 2 sqrt(c) bounded by
    s log s at s = exp(-v^2/4c), and the core bounded by the minimum -1/e.
    """
    v = vgrid.v
    a = v**2 / (4.0 * c)
    tail = np.abs(v) >= 2.0 * np.sqrt(c)
    return float((np.sum(a[tail] * np.exp(-a[tail])) + np.count_nonzero(~tail) / np.e) * vgrid.dv)


def moment_bound_constant(kappa, xgrid: SpatialGrid, vgrid: VelocityGrid):
    """C' in the a priori second-moment and dissipation bounds (0 when kappa = 0)."""
    if kappa == 0:
        return 0.0
    c1 = kappa * xgrid.length * flogf_constant(kappa, vgrid)
    return c1 + max(0.0, -0.5 * kappa * np.log(2.0 * np.pi * kappa))


# --- snapshot io -----------------------------------------------------------


def write_snapshot(path, f: Distribution):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["nx", "nv", "length", "vmax"])
        w.writerow([f.xgrid.n_x, f.vgrid.n_v, repr(f.xgrid.length), repr(f.vgrid.v_max)])
        for row in f.values:
            w.writerow([repr(float(x)) for x in row])


def read_snapshot(path) -> Distribution:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["nx", "nv", "length", "vmax"]:
            raise ValueError(f"bad snapshot header {header}")
        nx, nv, length, vmax = next(r)
        vals = np.array([[float(x) for x in row] for row in r if row])
    return Distribution(vals, SpatialGrid(int(nx), float(length)), VelocityGrid(int(nv), float(vmax)))
