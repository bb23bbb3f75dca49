import math
from pathlib import Path

import numpy as np
import pytest

from vpfplab.config import FourierIC, read_flat, sim_config
from vpfplab.core import MacroState, SpatialGrid, VelocityGrid, kinetic_entropy_H, macroscopic_entropy_eta, moments
from vpfplab.errors import GridTooSmall, NonpositiveValue
from vpfplab.metrics import AugmentedState, modulated_energy
from vpfplab.poisson_boltzmann import solve_pb
from vpfplab.study import (
    ROW_COLUMNS,
    StudyConfig,
    _replace,
    auto_vmax,
    convergence_study,
    rate_fit,
    well_prepared_ic,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
TAUS = [0.1, 0.05, 0.025, 0.0125]


@pytest.mark.parametrize("power", [1.0, 0.5, 2.0])
def test_rate_fit_exact_power(power):
    s, c, res = rate_fit(TAUS, [t**power for t in TAUS])
    assert s == pytest.approx(power, abs=1e-12)
    assert c == pytest.approx(0.0, abs=1e-12)
    assert res < 1e-12


def test_rate_fit_noisy_sqrt():
    rng = np.random.default_rng(0)
    for _ in range(50):
        vals = [3 * math.sqrt(t) * (1 + 1e-3 * rng.standard_normal()) for t in TAUS]
        s, c, _ = rate_fit(TAUS, vals)
        assert abs(s - 0.5) <= 0.02
        assert c == pytest.approx(math.log(3), abs=0.02)


def test_rate_fit_errors():
    with pytest.raises(NonpositiveValue):
        rate_fit(TAUS, [1.0, 0.5, 0.0, 0.1])
    with pytest.raises(NonpositiveValue):
        rate_fit(TAUS, [1.0, float("nan"), 0.2, 0.1])
    with pytest.raises(ValueError):
        rate_fit([0.1, 0.05], [1.0, 0.5])


def test_study_config_validation():
    with pytest.raises(ValueError, match="decreasing"):
        StudyConfig(tau_list=(0.05, 0.1))
    with pytest.raises(ValueError, match="positive"):
        StudyConfig(tau_list=(0.1, 0.0))
    with pytest.raises(ValueError, match="4x"):
        StudyConfig(kinetic_nx=64, fluid_nx=128)
    with pytest.raises(ValueError, match="dt"):
        StudyConfig(fluid_dt_ratio=2)


def test_step_plan_aligns_snapshots():
    cfg = StudyConfig()
    steps, per = cfg.step_plan()
    assert steps == per * cfg.n_snapshots
    assert cfg.t_end / steps <= cfg.kinetic_dt * (1 + 1e-12)
    assert cfg.n_snapshots >= 20


def test_config_parsing(tmp_path):
    p = tmp_path / "s.cfg"
    p.write_text("# comment\nkappa = 0\ntau_list = 0.2, 0.1, 0.05   # trailing\n"
                 "kinetic_vmax = auto\nrho0_cos = 1.0, 0.1\nu0_sin = 0.0, 0.05\n")
    cfg = StudyConfig.from_file(p)
    assert cfg.kappa == 0.0 and cfg.tau_list == (0.2, 0.1, 0.05)
    assert cfg.kinetic_vmax is None
    assert cfg.ic == FourierIC((1.0, 0.1), (), (), (0.0, 0.05))
    g = SpatialGrid(8)
    np.testing.assert_allclose(cfg.ic.u(g), 0.05 * np.sin(4 * np.pi * g.x), atol=1e-15)
    p.write_text("kappa = 1\nbogus = 3\n")
    with pytest.raises(KeyError):
        StudyConfig.from_file(p)
    with pytest.raises(KeyError):
        sim_config(read_flat(p), strict=True)


def _ic(n=64):
    g = SpatialGrid(n)
    ic = FourierIC()
    return g, ic.rho(g), ic.u(g)


def test_well_prepared_kappa1_zero_modulated_energy():
    g, rho, u = _ic()
    vg = VelocityGrid(128, 8.0)
    f = well_prepared_ic(rho, u, 1.0, 0.05, vg, g)
    mac = moments(f)
    ref = MacroState.from_velocity(rho, u, g)
    rep = modulated_energy(AugmentedState.from_fields(mac, solve_pb(mac.rho, g)),
                           AugmentedState.from_fields(ref, solve_pb(ref.rho, g)), 1.0)
    assert rep.total <= 1e-10
    assert kinetic_entropy_H(f, 1.0) - macroscopic_entropy_eta(mac, 1.0) == pytest.approx(0.0, abs=1e-9)


def test_well_prepared_pressureless_entropy_gap():
    g = SpatialGrid(16)
    vg = VelocityGrid(512, 1.0)
    f = well_prepared_ic(np.ones(16), np.zeros(16), 0.0, 0.01, vg, g)
    gap = kinetic_entropy_H(f, 0.0) - macroscopic_entropy_eta(moments(f), 0.0)
    assert gap == pytest.approx(0.005, rel=1e-6)
    mac = moments(f)
    np.testing.assert_allclose(mac.rho, 1.0, rtol=1e-14)
    assert np.max(np.abs(mac.momentum)) < 1e-14


def test_well_prepared_rejects_small_grid_and_vacuum():
    g, rho, u = _ic(16)
    with pytest.raises(GridTooSmall):
        well_prepared_ic(rho, u, 1.0, 0.05, VelocityGrid(64, 3.0), g)
    with pytest.raises(ValueError):
        well_prepared_ic(np.zeros(16), u, 1.0, 0.05, VelocityGrid(64, 8.0), g)


def test_auto_vmax_resolves_maxwellian():
    for theta, umax in [(0.0125, 0.12), (1.0, 0.5)]:
        vm = auto_vmax(theta, umax)
        assert vm**2 >= 40 * theta + umax**2


def test_self_comparison_rows_are_zero(tmp_path):
    cfg = StudyConfig(tau_list=(0.1,), t_end=0.02, kinetic_nx=16, kinetic_nv=64, kinetic_dt=5e-3,
                      fluid_nx=64, n_snapshots=2, workers=1, self_compare=True, output_dir=str(tmp_path))
    res = convergence_study(cfg)
    assert len(res.rows) == 1
    # squared roundoff of the discrete second moment is the only residue
    assert all(v <= 1e-24 for v in res.rows[0].values()[1:])
    head = (tmp_path / "rows.csv").read_text().splitlines()[0]
    assert head == ",".join(ROW_COLUMNS)


def test_self_comparison_pressureless(tmp_path):
    cfg = StudyConfig(kappa=0.0, tau_list=(0.1,), t_end=0.02, kinetic_nx=16, kinetic_nv=64, kinetic_dt=5e-3,
                      kinetic_vmax=None, fluid_nx=64, n_snapshots=2, workers=1, self_compare=True,
                      output_dir=str(tmp_path))
    row = convergence_study(cfg).rows[0]
    assert all(v == 0.0 for v in row.values()[1:])


def test_smoke_study_outputs(tmp_path):
    cfg = StudyConfig.from_file(CONFIGS / "study_smoke.cfg")
    cfg = _replace(cfg, output_dir=str(tmp_path))
    res = convergence_study(cfg)
    assert [r.tau for r in res.rows] == [0.1, 0.05, 0.025]
    for r in res.rows:
        assert all(v >= 0 for v in r.values())
    rates = (tmp_path / "rates.csv").read_text().splitlines()
    assert rates[0] == "metric,slope,intercept,residual"
    assert len(rates) == len(ROW_COLUMNS)
    for name in ("timing.csv", "fluid_log.csv", "config_used.txt", "report_tau_0.1.csv",
                 "diagnostics_tau_0.025.csv"):
        assert (tmp_path / name).exists()
