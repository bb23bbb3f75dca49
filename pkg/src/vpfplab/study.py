"""Well-prepared data, the tau-sweep convergence study and log-log rate fits."""
from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .config import FourierIC, build, read_flat
from .core import (
    Distribution,
    MacroState,
    SimConfig,
    SpatialGrid,
    VelocityGrid,
    bulk_velocity,
    fourier_resample,
    maxwellian,
    moments,
)
from .errors import NonpositiveValue
from .fluid import RHO_FLOOR, run_fluid, write_fluid_snapshot
from .kinetic import run_kinetic
from .metrics import (
    AugmentedState,
    dbl_macro_bounds,
    dbl_phase_space,
    modulated_energy,
    write_reports,
)
from .poisson_boltzmann import solve_pb

ROW_COLUMNS = (
    "tau",
    "sup_F",
    "sup_field",
    "sup_rho_l1_sq",
    "sup_rhoe_l1_sq",
    "sup_mom_l1_sq",
    "sup_flux_l1_sq",
    "closure_sq",
    "sup_dbl_rho_sq",
    "sup_dbl_mom_sq",
    "int_dbl_f_sq",
    "int_f_l1_sq",
)
RATE_COLUMNS = ("metric", "slope", "intercept", "residual")


@dataclass(frozen=True)
class StudyConfig:
    kappa: float = 1.0
    tau_list: tuple = (0.1, 0.05, 0.025, 0.0125)
    t_end: float = 0.2
    kinetic_nx: int = 64
    kinetic_nv: int = 128
    kinetic_vmax: float | None = 8.0  # None selects the automatic rule
    kinetic_dt: float = 1e-3
    fluid_nx: int = 256
    fluid_order: int = 2
    fluid_dt_ratio: int = 4
    n_snapshots: int = 40
    length: float = 1.0
    pb_tol: float = 1e-10
    boundary_mass_tol: float = 1e-8
    stabilizer_epsilon: float = 0.0
    seed: int = 0
    workers: int = 0
    output_dir: str = "study_out"
    dump_fields: bool = False
    self_compare: bool = False
    ic: FourierIC = field(default_factory=FourierIC)

    def __post_init__(self):
        taus = list(self.tau_list)
        if not taus or any(t <= 0 for t in taus):
            raise ValueError("tau_list must hold positive values")
        if any(b >= a for a, b in zip(taus, taus[1:])):
            raise ValueError("tau_list must be strictly decreasing")
        if self.fluid_nx < 4 * self.kinetic_nx:
            raise ValueError("fluid grid must be at least 4x the kinetic grid")
        if self.fluid_dt_ratio < 4:
            raise ValueError("fluid dt must be at least 4x smaller than the kinetic dt")
        if self.n_snapshots < 1:
            raise ValueError("n_snapshots must be positive")

    @classmethod
    def from_file(cls, path):
        m = read_flat(path)
        ic = FourierIC.from_mapping(m)
        cfg = build(cls, {k: v for k, v in m.items() if k != "ic"})
        return _replace(cfg, ic=ic)

    @property
    def kinetic_xgrid(self):
        return SpatialGrid(self.kinetic_nx, self.length)

    @property
    def fluid_xgrid(self):
        return SpatialGrid(self.fluid_nx, self.length)

    def step_plan(self):
        """(kinetic steps, kinetic steps per snapshot) with exact alignment."""
        per = max(1, math.ceil(self.t_end / self.kinetic_dt / self.n_snapshots - 1e-9))
        return per * self.n_snapshots, per


def _replace(cfg, **kw):
    d = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    d.update(kw)
    return type(cfg)(**d)


@dataclass(frozen=True)
class ConvergenceRow:
    tau: float
    sup_F: float
    sup_field: float
    sup_rho_l1_sq: float
    sup_rhoe_l1_sq: float
    sup_mom_l1_sq: float
    sup_flux_l1_sq: float
    closure_sq: float
    sup_dbl_rho_sq: float
    sup_dbl_mom_sq: float
    int_dbl_f_sq: float
    int_f_l1_sq: float
    wall_time: float = field(default=0.0, compare=False)

    def values(self):
        return tuple(getattr(self, c) for c in ROW_COLUMNS)


# --- initial data ---------------------------------------------------------------


def well_prepared_ic(rho0, u0, kappa, tau, vgrid: VelocityGrid, xgrid: SpatialGrid | None = None) -> Distribution:
    """Maxwellian data matched to the fluid state (temperature tau when kappa = 0)."""
    rho0 = np.asarray(rho0, dtype=float)
    if rho0.min() < RHO_FLOOR:
        raise ValueError("initial density below the fluid floor")
    theta = kappa if kappa > 0 else tau
    return maxwellian(rho0, u0, theta, vgrid, xgrid)


def auto_vmax(theta, umax):
    return 1.25 * math.sqrt(40.0 * theta + umax**2)


# --- rate fit -----------------------------------------------------------------------


def rate_fit(taus, values):
    """Least squares of log(value) on log(tau): (slope, intercept, rms residual)."""
    t = np.asarray(taus, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.size < 3 or t.size != y.size:
        raise ValueError("rate_fit needs at least 3 matching points")
    if np.any(~(y > 0)) or np.any(~(t > 0)):
        raise NonpositiveValue("rate_fit needs strictly positive values")
    X = np.log(t)
    Y = np.log(y)
    A = np.stack([X, np.ones_like(X)], axis=1)
    (slope, icpt), *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([slope, icpt]) - Y) ** 2)))
    return float(slope), float(icpt), resid


# --- study ------------------------------------------------------------------------------


@dataclass
class Reference:
    """Fluid reference snapshots restricted to the kinetic grid."""

    times: list
    macro: list
    aug: list
    u: list
    umax: float


def reference_run(cfg: StudyConfig):
    fg = cfg.fluid_xgrid
    kg = cfg.kinetic_xgrid
    ksteps, per = cfg.step_plan()
    dt_k = cfg.t_end / ksteps
    sim = SimConfig(kappa=cfg.kappa, tau=1.0, t_end=cfg.t_end, dt=dt_k / cfg.fluid_dt_ratio,
                    pb_tol=cfg.pb_tol, n_x=cfg.fluid_nx, length=cfg.length)
    U0 = MacroState.from_velocity(cfg.ic.rho(fg), cfg.ic.u(fg), fg)
    run = run_fluid(sim, U0, snapshot_every=per * cfg.fluid_dt_ratio, order=cfg.fluid_order, electrons=False)
    times, macs, augs, us = [], [], [], []
    for n, s in enumerate(run.snapshots):
        rho = fourier_resample(s.macro.rho, kg.n_x)
        m = fourier_resample(s.macro.momentum, kg.n_x)
        mac = MacroState(rho, m, kg)
        pot = solve_pb(rho, kg, tol=cfg.pb_tol)
        times.append(n * per * dt_k)
        macs.append(mac)
        augs.append(AugmentedState.from_fields(mac, pot))
        us.append(m / rho)
    umax = max(float(np.max(np.abs(s.macro.momentum / s.macro.rho))) for s in run.snapshots)
    return Reference(times, macs, augs, us, umax), run


def _trapezoid(ts, ys):
    ts = np.asarray(ts)
    ys = np.asarray(ys)
    return float(np.sum(0.5 * (ys[1:] + ys[:-1]) * np.diff(ts)))


def vgrid_for(cfg: StudyConfig, tau, umax):
    theta = cfg.kappa if cfg.kappa > 0 else tau
    vmax = cfg.kinetic_vmax if cfg.kinetic_vmax else auto_vmax(theta, umax)
    return VelocityGrid(cfg.kinetic_nv, vmax)


def tau_job(cfg: StudyConfig, tau, ref: Reference):
    """Run one kinetic simulation and evaluate every metric at each snapshot."""
    t0 = time.perf_counter()
    kg = cfg.kinetic_xgrid
    kappa = cfg.kappa
    vg = vgrid_for(cfg, tau, ref.umax)
    ksteps, per = cfg.step_plan()
    dx = kg.dx
    sim = SimConfig(kappa=kappa, tau=tau, t_end=cfg.t_end, dt=cfg.t_end / ksteps, pb_tol=cfg.pb_tol,
                    boundary_mass_tol=cfg.boundary_mass_tol, stabilizer_epsilon=cfg.stabilizer_epsilon,
                    n_x=kg.n_x, n_v=vg.n_v, v_max=vg.v_max, length=cfg.length)
    ts, reports, series = [], [], {k: [] for k in ("rho", "rhoe", "mom", "flux", "closure", "dblr", "dblm", "dblf", "fl1")}
    if cfg.self_compare:
        # trial == reference: rebuild the kinetic data from the reference moments
        snaps = None
    else:
        f0 = well_prepared_ic(ref.macro[0].rho, ref.u[0], kappa, tau, vg, kg)
        run = run_kinetic(sim, f0, snapshot_every=per)
        snaps = run.snapshots
    for n, t in enumerate(ref.times):
        raug = ref.aug[n]
        rmac = ref.macro[n]
        u = ref.u[n]
        if snaps is None:
            f = well_prepared_ic(rmac.rho, u, kappa, tau, vg, kg) if kappa > 0 else None
            tmac, taug = rmac, raug
        else:
            st = snaps[n]
            f = st.f
            tmac = moments(f)
            taug = AugmentedState.from_fields(tmac, st.potential)
        rep = modulated_energy(taug, raug, kappa, time=t)
        reports.append(rep)
        ts.append(t)
        ut = bulk_velocity(tmac)
        series["rho"].append(float(np.abs(tmac.rho - rmac.rho).sum() * dx) ** 2)
        series["rhoe"].append(float(np.abs(taug.rho_e - raug.rho_e).sum() * dx) ** 2)
        series["mom"].append(float(np.abs(tmac.momentum - rmac.momentum).sum() * dx) ** 2)
        series["flux"].append(float(np.abs(tmac.rho * ut**2 - rmac.rho * u**2).sum() * dx) ** 2)
        w1, bm, _ = dbl_macro_bounds(tmac, rmac.rho, u)
        series["dblr"].append(w1**2)
        series["dblm"].append(bm**2)
        if f is None:
            series["closure"].append(0.0)
            series["dblf"].append(0.0)
            series["fl1"].append(0.0)
            continue
        v = vg.v
        press = (f.values * (v[None, :] - ut[:, None]) ** 2).sum(axis=1) * vg.dv
        series["closure"].append(float(np.abs(press - kappa * rmac.rho).sum() * dx))
        # distance to rho delta(v - u) only measures the pressureless limit
        series["dblf"].append(dbl_phase_space(f, rmac.rho, u).total ** 2 if kappa == 0 else 0.0)
        M = maxwellian(rmac.rho, u, kappa, vg, kg)
        series["fl1"].append(float(np.abs(f.values - M.values).sum() * dx * vg.dv))
    row = ConvergenceRow(
        tau=float(tau),
        sup_F=max(r.total for r in reports),
        sup_field=max(r.field_term for r in reports),
        sup_rho_l1_sq=max(series["rho"]),
        sup_rhoe_l1_sq=max(series["rhoe"]),
        sup_mom_l1_sq=max(series["mom"]),
        sup_flux_l1_sq=max(series["flux"]),
        closure_sq=_trapezoid(ts, series["closure"]) ** 2,
        sup_dbl_rho_sq=max(series["dblr"]),
        sup_dbl_mom_sq=max(series["dblm"]),
        int_dbl_f_sq=_trapezoid(ts, series["dblf"]),
        int_f_l1_sq=_trapezoid(ts, series["fl1"]) ** 2,
        wall_time=time.perf_counter() - t0,
    )
    diag = None if snaps is None else run.diagnostics
    return row, reports, diag


@dataclass
class StudyResult:
    rows: list
    rates: dict
    reports: dict
    diagnostics: dict
    reference: Reference


def fit_rates(rows):
    taus = [r.tau for r in rows]
    out = {}
    for col in ROW_COLUMNS[1:]:
        vals = [getattr(r, col) for r in rows]
        try:
            out[col] = rate_fit(taus, vals)
        except (NonpositiveValue, ValueError):
            out[col] = (math.nan, math.nan, math.nan)
    return out


def _job(args):
    return tau_job(*args)


def convergence_study(cfg: StudyConfig, write=True) -> StudyResult:
    ref, fluid_run = reference_run(cfg)
    jobs = [(cfg, tau, ref) for tau in cfg.tau_list]
    workers = cfg.workers or min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_job, jobs))
    else:
        results = [_job(j) for j in jobs]
    rows = [r[0] for r in results]
    res = StudyResult(rows, fit_rates(rows) if len(rows) >= 3 else {},
                      {r[0].tau: r[1] for r in results}, {r[0].tau: r[2] for r in results}, ref)
    if write:
        write_study(cfg, res, fluid_run)
    return res


def _fmt(x):
    return repr(float(x))


def write_study(cfg: StudyConfig, res: StudyResult, fluid_run=None):
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "rows.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ROW_COLUMNS)
        for r in res.rows:
            w.writerow([_fmt(x) for x in r.values()])
    with open(os.path.join(out, "rates.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RATE_COLUMNS)
        for k, (s, i, e) in res.rates.items():
            w.writerow([k, _fmt(s), _fmt(i), _fmt(e)])
    # wall times vary run to run, so they live apart from rows.csv
    with open(os.path.join(out, "timing.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("tau", "wall_time"))
        for r in res.rows:
            w.writerow([_fmt(r.tau), f"{r.wall_time:.3f}"])
    for tau, reps in res.reports.items():
        write_reports(os.path.join(out, f"report_tau_{tau:g}.csv"), reps)
    for tau, diag in res.diagnostics.items():
        if diag is not None:
            diag.write_csv(os.path.join(out, f"diagnostics_tau_{tau:g}.csv"))
    if fluid_run is not None:
        fluid_run.write_log(os.path.join(out, "fluid_log.csv"))
        if cfg.dump_fields:
            for n, s in enumerate(fluid_run.snapshots):
                write_fluid_snapshot(os.path.join(out, f"fluid_snap_{n:03d}.csv"), s)
    with open(os.path.join(out, "config_used.txt"), "w") as fh:
        for k, v in asdict(cfg).items():
            fh.write(f"{k} = {v}\n")


def study_verdicts(cfg: StudyConfig, res: StudyResult):
    """Acceptance verdicts for the rate study: list of (name, passed, detail)."""
    rows = res.rows
    rates = res.rates
    out = []
    F = [r.sup_F for r in rows]
    mono = all(b < a for a, b in zip(F, F[1:]))
    detail = " ".join(f"{x:.3e}" for x in F)
    if cfg.kappa > 0:
        out.append(("sup_F strictly decreasing in tau", mono, detail))
    else:
        # reported only; the pressureless criterion asks for the rate alone
        out.append(("sup_F strictly decreasing in tau (info)", True, detail + ("" if mono else " non-monotone")))
    if cfg.kappa > 0:
        need = {"sup_F": 0.5, "sup_field": 0.5, "sup_rhoe_l1_sq": 0.5, "closure_sq": 0.25}
    else:
        need = {"sup_F": 0.5, "sup_dbl_rho_sq": 0.5, "sup_dbl_mom_sq": 0.5, "int_dbl_f_sq": 0.5}
    for k, lim in need.items():
        s = rates.get(k, (math.nan,))[0]
        out.append((f"slope({k}) >= {lim}", bool(s >= lim), f"slope={s:.4f}"))
    return out
