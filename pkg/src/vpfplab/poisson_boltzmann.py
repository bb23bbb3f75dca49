"""Poisson-Boltzmann solver -phi'' = rho - exp(phi) on the periodic grid."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MacroState, SpatialGrid, _frozen, spectral_derivative, wavenumbers
from .errors import NonConvergence, ZeroMass

LINEAR_TOL = 1e-12
EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Potential:
    phi: np.ndarray
    e_field: np.ndarray
    residual_norm: float
    grid: SpatialGrid
    iterations: int = 0
    history: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "phi", _frozen(self.phi))
        object.__setattr__(self, "e_field", _frozen(self.e_field))

    @property
    def rho_e(self):
        return np.exp(self.phi)


def l2norm(a, grid: SpatialGrid):
    return float(np.sqrt(np.sum(np.asarray(a) ** 2) * grid.dx))


def _neg_lap_hat(grid):
    return wavenumbers(grid) ** 2


def apply_linearized(phi, psi, grid: SpatialGrid):
    """(-Laplacian + exp(phi)) psi."""
    k2 = _neg_lap_hat(grid)
    return np.fft.irfft(k2 * np.fft.rfft(psi), n=grid.n_x) + np.exp(phi) * psi


def pb_residual(phi, rho, grid: SpatialGrid):
    k2 = _neg_lap_hat(grid)
    return np.fft.irfft(k2 * np.fft.rfft(phi), n=grid.n_x) - rho + np.exp(phi)


def solve_linearized(phi, g, grid: SpatialGrid | None = None, tol=LINEAR_TOL, max_iter=200):
    """Solve (-Laplacian + exp(phi)) psi = g.

    Preconditioned CG with the constant-coefficient operator
    (-Laplacian + mean exp(phi)) inverted exactly in Fourier space.
    """
    phi = np.asarray(phi, dtype=float)
    g = np.asarray(g, dtype=float)
    if grid is None:
        grid = SpatialGrid(phi.size)
    n = grid.n_x
    w = np.exp(phi)
    k2 = _neg_lap_hat(grid)
    pre = 1.0 / (k2 + w.mean())

    def A(p):
        return np.fft.irfft(k2 * np.fft.rfft(p), n=n) + w * p

    def M(r):
        return np.fft.irfft(pre * np.fft.rfft(r), n=n)

    x = M(g)
    for _restart in range(4):
        r = g - A(x)
        res = l2norm(r, grid)
        if res <= tol:
            return x
        z = M(r)
        p = z.copy()
        rz = r @ z
        for _ in range(max_iter):
            Ap = A(p)
            alpha = rz / (p @ Ap)
            x = x + alpha * p
            r = r - alpha * Ap
            if l2norm(r, grid) <= 0.5 * tol:
                break  # recheck with the true residual on restart
            z = M(r)
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
    res = l2norm(g - A(x), grid)
    # accept a stall at the roundoff floor of the spectral operator
    floor = 8.0 * EPS * (k2[-1] + w.max()) * l2norm(x, grid)
    if res <= max(tol, floor):
        return x
    raise NonConvergence(f"linearized solve stalled at residual {res:.3e}", residual=res)


def mollify(a, grid: SpatialGrid, epsilon):
    """Convolve with a Gaussian truncated to radius epsilon (identity if epsilon < dx)."""
    if epsilon <= 0 or epsilon < grid.dx:
        return np.asarray(a, dtype=float)
    n = grid.n_x
    d = (np.arange(n) * grid.dx + 0.5 * grid.length) % grid.length - 0.5 * grid.length
    ker = np.where(np.abs(d) <= epsilon, np.exp(-0.5 * (3.0 * d / epsilon) ** 2), 0.0)
    ker /= ker.sum()
    return np.fft.irfft(np.fft.rfft(a) * np.fft.rfft(ker), n=n)


def electric_field(phi, grid: SpatialGrid | None = None):
    phi = np.asarray(phi, dtype=float)
    if grid is None:
        grid = SpatialGrid(phi.size)
    e = -spectral_derivative(phi, grid)
    return e - e.mean()


def solve_pb(rho, grid: SpatialGrid | None = None, tol=1e-10, max_iter=60, phi0=None) -> Potential:
    """Damped Newton for G(phi) = -phi'' - rho + exp(phi) = 0."""
    rho = np.asarray(rho, dtype=float)
    if grid is None:
        grid = SpatialGrid(rho.size)
    if rho.min() < 0:
        raise ValueError(f"density must be nonnegative (min {rho.min():.3e})")
    mass = rho.sum() * grid.dx
    if not mass > 0:
        raise ZeroMass("Poisson-Boltzmann needs positive total density")
    if phi0 is None:
        phi = np.full(grid.n_x, np.log(mass / grid.length))
    else:
        phi = np.array(phi0, dtype=float)
    G = pb_residual(phi, rho, grid)
    res = l2norm(G, grid)
    hist = [res]
    it = 0
    while res > tol:
        if it >= max_iter:
            raise NonConvergence(f"Poisson-Boltzmann residual {res:.3e} after {it} iterations", residual=res)
        step = solve_linearized(phi, -G, grid, tol=max(1e-4 * res, 1e-15))
        lam = 1.0
        while True:
            trial = phi + lam * step
            Gt = pb_residual(trial, rho, grid)
            rt = l2norm(Gt, grid)
            if rt < res:
                break
            lam *= 0.5
            if lam < 1e-10:
                raise NonConvergence(f"line search failed at residual {res:.3e}", residual=res)
        phi, G, res = trial, Gt, rt
        hist.append(res)
        it += 1
    # a constant shift removes the mean of G, i.e. makes int e^phi = int rho
    shifted = phi + np.log(mass / (np.exp(phi).sum() * grid.dx))
    rs = l2norm(pb_residual(shifted, rho, grid), grid)
    if rs <= max(res, tol):
        phi, res = shifted, rs
    return Potential(phi, electric_field(phi, grid), res, grid, it, tuple(hist))


def dphi_dt(macro: MacroState, phi):
    """Time derivative of phi under the continuity equation rho_t = -(rho u)_x."""
    grid = macro.grid
    g = -spectral_derivative(macro.momentum, grid)
    return solve_linearized(phi, g, grid)


def stability_check(rho1, rho2, grid: SpatialGrid | None = None, tol=1e-10):
    """(int |phi1' - phi2'|^2, int |rho1 - rho2|^2)."""
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    if grid is None:
        grid = SpatialGrid(rho1.size)
    p1 = solve_pb(rho1, grid, tol=tol)
    p2 = solve_pb(rho2, grid, tol=tol)
    lhs = float(np.sum((p1.e_field - p2.e_field) ** 2) * grid.dx)
    rhs = float(np.sum((rho1 - rho2) ** 2) * grid.dx)
    return lhs, rhs


def picard_oracle(rho, grid: SpatialGrid, tol=1e-12, max_iter=5000):
    """Independent fixed-point reference: (-Lap + 1) phi_new = rho - exp(phi) + phi."""
    rho = np.asarray(rho, dtype=float)
    k2 = _neg_lap_hat(grid)
    phi = np.full(grid.n_x, np.log(rho.mean()))
    for _ in range(max_iter):
        new = np.fft.irfft(np.fft.rfft(rho - np.exp(phi) + phi) / (k2 + 1.0), n=grid.n_x)
        if np.max(np.abs(new - phi)) < tol:
            return new
        phi = new
    raise NonConvergence("Picard iteration did not converge")
