import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vpfplab.core import (
    Distribution,
    SimConfig,
    SpatialGrid,
    VelocityGrid,
    maxwellian,
    moment_bound_constant,
    moments,
)
from vpfplab.errors import AbortOnLeak
from vpfplab.kinetic import (
    DIAG_COLUMNS,
    collision_solve,
    dissipation,
    energy_functional,
    potential_energy,
    run_kinetic,
    second_moment,
    step_accel_v,
    step_collision,
    step_transport_x,
)

XG = SpatialGrid(32)
VG = VelocityGrid(64, 8.0)


def _perturbed(kappa=1.0, n_x=64, n_v=128, v_max=8.0):
    xg, vg = SpatialGrid(n_x), VelocityGrid(n_v, v_max)
    rho = 1 + 0.2 * np.cos(2 * np.pi * xg.x)
    u = 0.1 * np.sin(2 * np.pi * xg.x)
    return maxwellian(rho, u, kappa, vg, xg)


def _random_f(rng, xg=XG, vg=VG):
    v = vg.v[None, :]
    mu = rng.uniform(-1, 1, (xg.n_x, 1))
    return Distribution(rng.uniform(0.5, 1.5, (xg.n_x, 1)) * np.exp(-(v - mu) ** 2)
                        + 0.3 * np.exp(-((v + mu) ** 2) / 0.5) * rng.random((xg.n_x, 1)), xg, vg)


def test_transport_integer_shift_exact(rng):
    f = _random_f(rng)
    j = VG.n_v // 2 + 3
    dt = 2 * XG.dx / VG.v[j]
    out = step_transport_x(f, dt)
    np.testing.assert_allclose(out.values[:, j], np.roll(f.values[:, j], 2), rtol=0, atol=1e-15)


def test_transport_constant_in_x_unchanged():
    f = maxwellian(np.ones(32), np.zeros(32), 1.0, VG, XG)
    np.testing.assert_allclose(step_transport_x(f, 0.013).values, f.values, rtol=1e-14)


def test_transport_composition_second_order():
    errs = []
    for n in (32, 64):
        xg = SpatialGrid(n)
        vg = VelocityGrid(16, 1.0)
        vals = np.outer(1 + 0.3 * np.sin(2 * np.pi * xg.x), np.ones(16))
        f = Distribution(vals, xg, vg)
        a = step_transport_x(step_transport_x(f, 0.05), 0.05).values
        b = step_transport_x(f, 0.1).values
        errs.append(np.abs(a - b).max())
    assert errs[1] < errs[0] / 3


def test_accel_identity_and_drift(rng):
    f = _random_f(rng)
    out, leak = step_accel_v(f, np.zeros(32), 0.1)
    np.testing.assert_array_equal(out.values, f.values)
    assert leak == 0.0
    E = np.full(32, 0.5)
    out, leak = step_accel_v(f, E, 0.1)
    du = moments(out).momentum / moments(out).rho - moments(f).momentum / moments(f).rho
    np.testing.assert_allclose(du, 0.05, atol=1e-12)


def test_accel_leak_bookkeeping():
    vg = VelocityGrid(32, 2.0)
    f = maxwellian(np.ones(32), np.full(32, 1.6), 0.0, vg, XG)
    out, leak = step_accel_v(f, np.full(32, 2.0), 0.5)
    assert leak > 0
    assert f.mass - out.mass == pytest.approx(leak, abs=1e-14)


@given(seed=st.integers(0, 10**6), kappa=st.sampled_from([0.0, 0.3, 1.0]), h=st.floats(1e-3, 1e3))
def test_collision_conserves(seed, kappa, h):
    f = _random_f(np.random.default_rng(seed))
    m0 = moments(f)
    m1 = moments(step_collision(f, kappa, 1.0, h))
    np.testing.assert_allclose(m1.rho, m0.rho, rtol=1e-14)
    scale = np.abs(f.values) @ np.abs(VG.v) * VG.dv
    assert np.max(np.abs(m1.momentum - m0.momentum) / scale) < 1e-12


@pytest.mark.parametrize("h", [1e-2, 1.0, 1e3])
def test_maxwellian_is_fixed_point(h):
    f = maxwellian(1 + 0.2 * np.cos(2 * np.pi * XG.x), 0.3 * np.sin(2 * np.pi * XG.x), 1.0, VG, XG)
    assert np.abs(step_collision(f, 1.0, 1.0, h).values - f.values).max() < 1e-12 * f.values.max()


def test_deep_relaxation(rng):
    f = _random_f(rng, vg=VelocityGrid(128, 8.0))
    m = moments(f)
    target = maxwellian(m.rho, m.momentum / m.rho, 1.0, f.vgrid, f.xgrid)
    g = f
    for _ in range(3):
        g = step_collision(g, 1.0, 1.0, 1e3)
    err = np.abs(g.values - target.values).sum() * XG.dx * f.vgrid.dv
    assert err < 1e-6


def test_collision_raw_solve_flux_form(rng):
    f = _random_f(rng)
    vals, mac = collision_solve(f, 1.0, 0.5)
    np.testing.assert_allclose(vals.sum(1) * VG.dv, mac.rho, rtol=1e-13)


def test_dissipation_properties():
    f = maxwellian(1 + 0.2 * np.cos(2 * np.pi * XG.x), 0.2, 1.0, VG, XG)
    assert abs(dissipation(f, 1.0)) < 1e-10
    assert dissipation(f, 0.5) > 0
    g = _random_f(np.random.default_rng(3))
    assert dissipation(g.with_values(2 * g.values), 1.0) == pytest.approx(2 * dissipation(g, 1.0), rel=1e-12)


def test_energy_functional():
    f = maxwellian(np.ones(32), np.zeros(32), 1.0, VelocityGrid(128, 8.0), XG)
    assert abs(energy_functional(f, np.zeros(32), 1.0)) < 1e-10
    prev = 0.0
    for a in (0.1, 0.2, 0.4):
        phi = a * np.cos(2 * np.pi * XG.x)
        pe = potential_energy(phi, 2 * np.pi * a * np.sin(2 * np.pi * XG.x), XG)
        assert pe > prev >= 0
        prev = pe


def test_global_equilibrium_stays_put():
    cfg = SimConfig(kappa=1.0, tau=0.05, t_end=0.1, dt=1e-3, n_x=32, n_v=64)
    f0 = maxwellian(np.ones(32), np.zeros(32), 1.0, VG, XG)
    run = run_kinetic(cfg, f0)
    assert run.steps == 100
    assert np.abs(run.final.f.values - f0.values).max() < 1e-8
    for col in ("mass", "momentum", "energy"):
        c = run.diagnostics.column(col)
        assert np.ptp(c) < 1e-12


def test_default_run_entropy_inequality_and_bounds():
    f0 = _perturbed()
    cfg = SimConfig(kappa=1.0, tau=0.05, t_end=0.2, dt=1e-3)
    run = run_kinetic(cfg, f0, snapshot_every=50)
    d = run.diagnostics
    E0 = d.column("energy")[0]
    assert d.kei_violation(cfg.tau) <= 1e-6 * abs(E0)
    cprime = moment_bound_constant(1.0, f0.xgrid, f0.vgrid)
    assert d.column("cum_dissipation")[-1] <= cfg.tau * (E0 + cprime)
    assert d.column("second_moment").max() <= 4 * (E0 + cprime * (1 + f0.mass))
    assert abs(d.column("mass")[-1] - f0.mass) < 1e-12
    assert len(run.snapshots) == 5


def _dt_changes():
    f0 = _perturbed(n_x=32, n_v=64)
    sup = []
    for dt in (4e-3, 2e-3, 1e-3):
        run = run_kinetic(SimConfig(kappa=1.0, tau=0.05, t_end=0.1, dt=dt), f0)
        sup.append(run.diagnostics.column("second_moment"))
    return np.abs(sup[0] - sup[1][::2]).max(), np.abs(sup[1] - sup[2][::2]).max()


def test_halving_dt_self_converges():
    e1, e2 = _dt_changes()
    assert e2 < e1 / 1.8  # the single backward-Euler collision solve makes this first order


@pytest.mark.xfail(strict=True, reason="one implicit collision solve per step is first order in dt")
def test_halving_dt_second_order():
    e1, e2 = _dt_changes()
    assert e2 < e1 / 3


def test_abort_on_leak():
    vg = VelocityGrid(32, 1.0)
    f0 = maxwellian(np.ones(16), np.full(16, 0.9), 0.0, vg, SpatialGrid(16))
    cfg = SimConfig(kappa=0.0, tau=1.0, t_end=0.5, dt=0.01, boundary_mass_tol=1e-12)
    E = np.full(16, 5.0)
    from vpfplab import kinetic

    with pytest.raises(AbortOnLeak):
        orig = kinetic._field
        try:
            kinetic._field = lambda f, c, p: (lambda P: kinetic.Potential(P.phi, E, 0.0, P.grid))(orig(f, c, p))
            run_kinetic(cfg, f0)
        finally:
            kinetic._field = orig


def test_diagnostics_csv(tmp_path):
    f0 = _perturbed(n_x=16, n_v=64)
    run = run_kinetic(SimConfig(t_end=0.01, dt=1e-3), f0)
    p = tmp_path / "d.csv"
    run.diagnostics.write_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == ",".join(DIAG_COLUMNS)
    assert len(lines) == 12
    assert second_moment(run.final.f) > 0
