"""Command line entry point: ``vpfplab <subcommand>``.

Exit status is 0 when every enabled check passes, 1 when a check fails and
2 when a run aborts with a solver error.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import kernels
from .config import FourierIC, read_flat, sim_config
from .core import MacroState, SpatialGrid, VelocityGrid, write_snapshot
from .errors import VPFPError


def _say(*a):
    print(*a, flush=True)


def read_density(path):
    """1D density from CSV: column ``rho`` if a header names it, else the last column."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    head = [c.strip() for c in rows[0]]
    try:
        [float(c) for c in head]
        col, body = len(head) - 1, rows
    except ValueError:
        col = head.index("rho") if "rho" in head else len(head) - 1
        body = rows[1:]
    return np.array([float(r[col]) for r in body])


def cmd_pb_solve(args):
    from .poisson_boltzmann import pb_residual, solve_pb

    rho = read_density(args.rho)
    grid = SpatialGrid(rho.size, args.length)
    pot = solve_pb(rho, grid, tol=args.tol)
    neutral = abs(grid.integrate(pot.rho_e) - grid.integrate(rho))
    res_inf = float(np.max(np.abs(pb_residual(pot.phi, rho, grid))))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("x", "rho", "phi", "e_field", "rho_e"))
        for row in zip(grid.x, rho, pot.phi, pot.e_field, pot.rho_e):
            w.writerow([repr(float(v)) for v in row])
    _say(f"pb-solve n_x={grid.n_x} iterations={pot.iterations} residual_l2={pot.residual_norm:.3e} "
         f"residual_max={res_inf:.3e} neutrality={neutral:.3e}")
    return 0 if pot.residual_norm <= args.tol and neutral < 1e-10 else 1


def _sim_and_ic(path):
    m = read_flat(path)
    cfg = sim_config(m, strict=True)
    return cfg, FourierIC.from_mapping(m)


def cmd_run_kinetic(args):
    from .kinetic import run_kinetic
    from .study import well_prepared_ic

    cfg, ic = _sim_and_ic(args.config)
    xg = SpatialGrid(cfg.n_x, cfg.length)
    vg = VelocityGrid(cfg.n_v, cfg.v_max)
    f0 = well_prepared_ic(ic.rho(xg), ic.u(xg), cfg.kappa, cfg.tau, vg, xg)
    run = run_kinetic(cfg, f0)
    os.makedirs(args.out, exist_ok=True)
    run.diagnostics.write_csv(os.path.join(args.out, "diagnostics.csv"))
    for n, st in enumerate(run.snapshots):
        write_snapshot(os.path.join(args.out, f"f_{n:03d}.csv"), st.f)
    d = run.diagnostics
    E0 = d.column("energy")[0]
    jump = float(np.max(np.diff(d.kei_series(cfg.tau)))) if len(d.rows) > 1 else 0.0
    mass = d.column("mass")
    drift = abs(mass[-1] + d.column("leak")[-1] - mass[0]) / mass[0]
    ok = jump <= cfg.energy_tol * abs(E0)
    _say(f"run-kinetic steps={run.steps} dt={run.dt:.4g} mass_drift={drift:.2e} "
         f"max_increase(E + diss/tau)={jump:.3e} tol={cfg.energy_tol * abs(E0):.3e} "
         f"{'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_run_fluid(args):
    from .fluid import run_fluid, write_fluid_snapshot

    cfg, ic = _sim_and_ic(args.config)
    grid = SpatialGrid(cfg.n_x, cfg.length)
    U0 = MacroState.from_velocity(ic.rho(grid), ic.u(grid), grid)
    run = run_fluid(cfg, U0, order=args.order)
    os.makedirs(args.out, exist_ok=True)
    run.write_log(os.path.join(args.out, "fluid_log.csv"))
    for n, (st, el) in enumerate(zip(run.snapshots, run.electrons)):
        write_fluid_snapshot(os.path.join(args.out, f"fluid_{n:03d}.csv"), st, el)
    log = np.array(run.log)
    drift = abs(log[-1, 1] - log[0, 1]) / log[0, 1]
    res = max(e.continuity_residual / np.sqrt(np.sum(e.rho_e**2) * grid.dx) for e in run.electrons)
    ok = drift < 1e-12 and res <= 1e-8
    _say(f"run-fluid steps={run.steps} dt={run.dt:.4g} order={args.order} mass_drift={drift:.2e} "
         f"min_rho={log[:, 3].min():.4f} electron_residual={res:.2e} {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_converge(args):
    from .study import StudyConfig, _replace, convergence_study, study_verdicts

    cfg = StudyConfig.from_file(args.config)
    kw = {"output_dir": args.out}
    if args.workers is not None:
        kw["workers"] = args.workers
    cfg = _replace(cfg, **kw)
    res = convergence_study(cfg)
    for r in res.rows:
        _say(f"tau={r.tau:g} sup_F={r.sup_F:.4e} wall={r.wall_time:.1f}s")
    ok = True
    for name, passed, detail in study_verdicts(cfg, res):
        ok &= passed
        _say(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
    return 0 if ok else 1


def cmd_check(args):
    from .checks import check_suite

    rep = check_suite(args.seed, only=set(args.only) if args.only else None)
    for line in rep.lines():
        _say(line)
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(rep.to_json())
    _say(f"{sum(r.passed for r in rep.results)}/{len(rep.results)} checks passed (seed {args.seed}, "
         f"kernels: {kernels.BACKEND})")
    return 0 if rep.all_passed else 1


def build_parser():
    p = argparse.ArgumentParser(prog="vpfplab", description="Kinetic-to-fluid limit laboratory.")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("pb-solve", help="solve -phi'' = rho - exp(phi) for a density file")
    s.add_argument("--rho", required=True, help="CSV with a 'rho' column (or one value per line)")
    s.add_argument("--out", required=True)
    s.add_argument("--length", type=float, default=1.0)
    s.add_argument("--tol", type=float, default=1e-12)
    s.set_defaults(fn=cmd_pb_solve)

    s = sub.add_parser("run-kinetic", help="run the kinetic solver from a flat config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="kinetic_out")
    s.set_defaults(fn=cmd_run_kinetic)

    s = sub.add_parser("run-fluid", help="run the Euler-Poisson solver from a flat config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="fluid_out")
    s.add_argument("--order", type=int, choices=(1, 2), default=1)
    s.set_defaults(fn=cmd_run_fluid)

    s = sub.add_parser("converge", help="tau-sweep convergence study")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(fn=cmd_converge)

    s = sub.add_parser("check", help="randomized invariant suite")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--json", default=None, help="also write a machine-readable report")
    s.add_argument("--only", nargs="*", default=None, help="restrict to these check names")
    s.set_defaults(fn=cmd_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (VPFPError, ValueError, KeyError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
