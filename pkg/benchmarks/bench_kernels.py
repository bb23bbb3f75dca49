"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 20]

Each backend runs in its own interpreter (the backend is fixed at import),
selected through ``VPFPLAB_PURE``.
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, timeit
import numpy as np
from vpfplab import kernels
from vpfplab.core import SimConfig, SpatialGrid, VelocityGrid, maxwellian
from vpfplab.kinetic import run_kinetic

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
out = {"backend": kernels.BACKEND}
for nx, nv in ((64, 128), (256, 512)):
    f = rng.random((nx, nv)) + 0.1
    sx = rng.uniform(-3, 3, nv)
    sv = rng.uniform(-3, 3, nx)
    lo, up = -rng.random((nx, nv)), -rng.random((nx, nv))
    d = 2.5 + rng.random((nx, nv))
    cases = {
        "thomas_batched": lambda: kernels.thomas_batched(lo, d, up, f),
        "pfc_shift_periodic": lambda: kernels.pfc_shift_periodic(f.T, sx),
        "pfc_shift_open": lambda: kernels.pfc_shift_open(f, sv),
    }
    for name, fn in cases.items():
        fn()
        out[f"{name} {nx}x{nv}"] = min(timeit.repeat(fn, number=5, repeat=repeat)) / 5
cfg = SimConfig(kappa=1.0, tau=0.05, t_end=0.05, dt=1e-3, n_x=64, n_v=128, v_max=8.0)
xg, vg = SpatialGrid(64), VelocityGrid(128, 8.0)
f0 = maxwellian(1 + 0.2 * np.cos(2 * np.pi * xg.x), 0.1 * np.sin(2 * np.pi * xg.x), 1.0, vg, xg)
out["run_kinetic 50 steps 64x128"] = min(timeit.repeat(lambda: run_kinetic(cfg, f0), number=1, repeat=3))
print(json.dumps(out))
"""


def run(pure, repeat):
    env = dict(os.environ, VPFPLAB_PURE="1" if pure else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    fast, slow = run(False, args.repeat), run(True, args.repeat)
    if fast["backend"] != "cython":
        print("compiled extension not importable; build with `pip install -e . --no-build-isolation`")
    print(f"{'kernel':36s} {fast['backend']:>12s} {slow['backend']:>12s} {'speedup':>8s}")
    for k in fast:
        if k == "backend":
            continue
        print(f"{k:36s} {fast[k] * 1e3:10.3f}ms {slow[k] * 1e3:10.3f}ms {slow[k] / fast[k]:7.2f}x")


if __name__ == "__main__":
    main()
