"""Timing comparison of the numba-compiled kernels against the numpy fallback.

``python -m sqzphase.bench`` times the active backend on reference workloads
and, unless told otherwise, re-runs itself in a subprocess with the other
backend selected via SQZPHASE_NUMBA so both columns come from one command.
"""
from __future__ import annotations

import json
import math
import os
import subprocess
import sys
import time

import numpy as np

from . import kernels, sde
from ._backend import USE_NUMBA, backend_name
from .filters import PHI_OFFSET, _uniform_grid, diffusion_kernel
from .theory import BeamParams

_WORKLOADS = ("homodyne-ensemble", "heterodyne-ensemble", "bayes-replay")


def _time_workloads(n_traj: int = 64, n_steps: int = 4000, grid: int = 2000) -> dict:
    p = BeamParams(n_flux=1e4, gamma=5000.0, r=0.5 * math.log(2.0))
    dt = 2.0 * 0.05 / (p.gamma * (1.0 + p.epsilon))
    chi = 280.0
    sample_idx = np.arange(n_steps // 4, n_steps, 25, dtype=np.int64)
    noise_h = np.stack(
        [sde.trajectory_noise(1, i, n_steps, sde.HOMODYNE_CHANNELS) for i in range(n_traj)]
    )
    noise_het = np.stack(
        [sde.trajectory_noise(1, i, n_steps, sde.HETERODYNE_CHANNELS) for i in range(n_traj)]
    )
    zeros = np.zeros(n_traj)

    def homodyne():
        return kernels.run_homodyne_batch(
            noise_h, zeros, zeros.copy(), p.gamma, p.epsilon, p.e_amp, p.kappa, dt,
            chi, 0.5, PHI_OFFSET, True, sample_idx, False,
        )

    def heterodyne():
        return kernels.run_heterodyne_batch(
            noise_het, zeros, p.gamma, p.epsilon, p.e_amp, p.kappa, dt,
            chi, sample_idx, False,
        )

    err, est, i_rec, phi_rec, theta_rec, *_ = kernels.run_homodyne_batch(
        noise_h[:1], zeros[:1], zeros[:1].copy(), p.gamma, p.epsilon, p.e_amp, p.kappa, dt,
        chi, 0.5, PHI_OFFSET, True, sample_idx, True,
    )
    th = _uniform_grid(grid)
    cth, sth = np.cos(th), np.sin(th)
    kern = diffusion_kernel(p.kappa * dt, 2 * math.pi / grid, (grid - 1) // 2)

    def bayes():
        return kernels.bayes_homodyne_replay(
            i_rec[0], phi_rec[0], cth, sth,
            np.zeros(grid), np.zeros(grid), np.zeros(grid),
            np.full(grid, 1.0 + p.epsilon), np.zeros(grid), np.full(grid, 1.0 - p.epsilon),
            p.gamma, p.epsilon, p.e_amp, p.kappa, dt, kern, 1, sample_idx,
        )

    runs = {"homodyne-ensemble": homodyne, "heterodyne-ensemble": heterodyne, "bayes-replay": bayes}
    out = {}
    for name in _WORKLOADS:
        runs[name]()  # warm-up / JIT compile
        t0 = time.perf_counter()
        runs[name]()
        out[name] = time.perf_counter() - t0
    return out


def run_bench(compare_backends: bool = True) -> dict:
    mine = _time_workloads()
    results = {backend_name(): mine}
    if compare_backends:
        env = dict(os.environ)
        env["SQZPHASE_NUMBA"] = "0" if USE_NUMBA else "1"
        proc = subprocess.run(
            [sys.executable, "-m", "sqzphase.bench", "--inner"],
            capture_output=True, text=True, env=env,
        )
        if proc.returncode == 0:
            other = json.loads(proc.stdout)
            results.update(other)
        else:
            print(f"(other backend failed: {proc.stderr.strip()})", file=sys.stderr)
    names = sorted(results)
    print(f"{'workload':<22}" + "".join(f"{n:>14}" for n in names) + ("%14s" % "speedup" if len(names) == 2 else ""))
    for wl in _WORKLOADS:
        row = f"{wl:<22}"
        for n in names:
            row += f"{results[n][wl]:>13.4f}s"
        if len(names) == 2:
            a, b = (results[n][wl] for n in names)
            fast, slow = min(a, b), max(a, b)
            row += f"{slow / fast:>13.1f}x"
        print(row)
    return results


def main() -> int:
    if "--inner" in sys.argv:
        print(json.dumps({backend_name(): _time_workloads()}))
        return 0
    run_bench(compare_backends="--no-compare" not in sys.argv)
    return 0


if __name__ == "__main__":
    sys.exit(main())
