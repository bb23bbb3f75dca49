import numpy as np
import pytest

from vpfplab.core import MacroState, SimConfig, SpatialGrid
from vpfplab.errors import VacuumBreach
from vpfplab.fluid import (
    electron_velocity,
    fluid_step,
    fluid_total_energy,
    make_state,
    run_fluid,
    write_fluid_snapshot,
)


def smooth_ic(n):
    g = SpatialGrid(n)
    x = g.x
    return MacroState.from_velocity(1 + 0.2 * np.cos(2 * np.pi * x), 0.1 * np.sin(2 * np.pi * x), g)


def _coarsen(a):
    return a.reshape(-1, 2).mean(axis=1)


def test_constant_state_is_stationary():
    g = SpatialGrid(64)
    st = make_state(np.ones(64), np.zeros(64), g)
    assert fluid_total_energy(st, 1.0) == 0.0
    for _ in range(20):
        st = fluid_step(st, 0.5 * g.dx, 1.0)
    assert np.max(np.abs(st.macro.rho - 1)) < 1e-14
    assert np.max(np.abs(st.macro.momentum)) < 1e-14
    assert np.max(np.abs(st.potential.phi)) < 1e-14
    assert np.max(np.abs(electron_velocity(st).u_e)) < 1e-12


def test_constant_data_all_snapshots_constant():
    g = SpatialGrid(32)
    run = run_fluid(SimConfig(t_end=0.1, snapshot_every=2), MacroState(np.full(32, 2.0), np.zeros(32), g))
    assert len(run.snapshots) > 2
    for s in run.snapshots:
        assert np.ptp(s.macro.rho) < 1e-14 and np.max(np.abs(s.macro.momentum)) < 1e-14


@pytest.mark.parametrize("order", [1, 2])
def test_mass_conserved_over_1000_steps(order):
    U = smooth_ic(64)
    st = make_state(U.rho, U.momentum, U.grid)
    m0 = st.macro.rho.sum()
    for _ in range(1000):
        st = fluid_step(st, 2e-4, 1.0, order)
    assert abs(st.macro.rho.sum() - m0) / m0 <= 1e-13


def test_order1_self_convergence():
    sols = {}
    for n in (128, 256, 512):
        sols[n] = run_fluid(SimConfig(kappa=1.0, t_end=0.2), smooth_ic(n), electrons=False).snapshots[-1]
    errs = []
    for n in (128, 256):
        a, b = sols[n].macro, sols[2 * n].macro
        errs.append(np.abs(a.rho - _coarsen(b.rho)).mean() + np.abs(a.momentum - _coarsen(b.momentum)).mean())
    assert np.log2(errs[0] / errs[1]) >= 1.0


def test_order2_self_convergence_at_default_step():
    sols = {n: run_fluid(SimConfig(t_end=0.2), smooth_ic(n), order=2, electrons=False).snapshots[-1]
            for n in (128, 256, 512)}
    errs = [np.abs(sols[n].macro.rho - _coarsen(sols[2 * n].macro.rho)).mean() for n in (128, 256)]
    assert np.log2(errs[0] / errs[1]) >= 1.7


def test_energy_drift_shrinks_with_dx():
    drift = []
    for n in (128, 256, 512):
        log = np.array(run_fluid(SimConfig(t_end=0.2), smooth_ic(n), electrons=False).log)
        drift.append(np.max(np.abs(log[:, 2] - log[0, 2])))
        assert log[:, 3].min() > 0.5
    assert drift[1] < 0.6 * drift[0] and drift[2] < 0.6 * drift[1]


def test_energy_decreases_across_shock():
    g = SpatialGrid(256)
    U = MacroState.from_velocity(np.ones(256), 1.2 * np.sin(2 * np.pi * g.x), g)
    log = np.array(run_fluid(SimConfig(kappa=0.2, t_end=0.6, dt_cfl_factor=0.5), U, electrons=False).log)
    e = log[:, 2]
    assert np.all(np.diff(e) < 0)
    assert e[-1] < 0.5 * e[0]


def test_pressureless_run():
    run = run_fluid(SimConfig(kappa=0.0, t_end=0.2), smooth_ic(256))
    log = np.array(run.log)
    assert abs(log[-1, 1] - log[0, 1]) < 1e-13
    s = run.snapshots[-1]
    rho = s.macro.rho
    gap = fluid_total_energy(s, 1.0) - fluid_total_energy(s, 0.0)
    assert gap == pytest.approx(np.sum(rho * np.log(rho)) * s.grid.dx, rel=1e-12)


def test_electron_field_on_smooth_states():
    run = run_fluid(SimConfig(t_end=0.2, snapshot_every=10), smooth_ic(256))
    g = run.snapshots[0].grid
    for s, el in zip(run.snapshots, run.electrons):
        norm = np.sqrt(np.sum(el.rho_e**2) * g.dx)
        assert el.continuity_residual <= 1e-8 * norm
        assert abs(el.dt_rho_e.mean()) < 1e-10
        assert np.all(el.rho_e > 0)
        phi = s.potential.phi
        assert np.max(np.abs(el.u_e)) <= np.exp(np.max(np.abs(phi))) * np.max(np.abs(el.flux)) * (1 + 1e-12)
        assert abs(g.integrate(el.rho_e) - g.integrate(s.macro.rho)) <= 1e-9


def test_phi_time_derivative_consistent():
    from vpfplab.poisson_boltzmann import dphi_dt

    U = smooth_ic(256)
    s0 = make_state(U.rho, U.momentum, U.grid, pb_tol=1e-12)
    exact = dphi_dt(s0.macro, s0.potential.phi)
    fd = []
    for dt in (4e-4, 2e-4, 1e-4):
        s1 = fluid_step(s0, dt, 1.0, 2, pb_tol=1e-12)
        fd.append((s1.potential.phi - s0.potential.phi) / dt)
    d1 = np.max(np.abs(fd[0] - fd[1]))
    d2 = np.max(np.abs(fd[1] - fd[2]))
    assert 1.6 < d1 / d2 < 2.5
    assert np.max(np.abs(fd[2] - exact)) < 1e-2 * np.max(np.abs(exact))


def test_vacuum_breach():
    g = SpatialGrid(32)
    with pytest.raises(VacuumBreach):
        make_state(np.full(32, 1e-9), np.zeros(32), g)
    g = SpatialGrid(128)
    U = MacroState.from_velocity(np.ones(128), 40 * np.sin(2 * np.pi * (g.x - 0.5)), g)
    with pytest.raises(VacuumBreach):
        run_fluid(SimConfig(kappa=0.0, t_end=0.2, dt_cfl_factor=0.3), U, electrons=False)


def test_cfl_violation_rejected():
    U = smooth_ic(64)
    st = make_state(U.rho, U.momentum, U.grid)
    with pytest.raises(ValueError, match="CFL"):
        fluid_step(st, 2 * U.grid.dx, 1.0)


def test_snapshot_columns(tmp_path):
    U = smooth_ic(16)
    st = make_state(U.rho, U.momentum, U.grid)
    p = tmp_path / "s.csv"
    write_fluid_snapshot(p, st)
    head = p.read_text().splitlines()[0]
    assert head == "x,rho,u,phi,rho_e,u_e"
    data = np.loadtxt(p, delimiter=",", skiprows=1)
    assert data.shape == (16, 6)
    np.testing.assert_array_equal(data[:, 1], st.macro.rho)
