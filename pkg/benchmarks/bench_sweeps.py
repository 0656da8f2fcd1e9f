"""Compare the numba and numpy time sweeps, plus one full nonlinear solve per backend.

Usage: python benchmarks/bench_sweeps.py [--repeat 5] [--N 64] [--Nt 2000]
The solve timing for the numpy path runs in a subprocess with MFGINV_NUMBA=0.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from mfginv import _kernels

_SOLVE_SNIPPET = """
import json, time
import numpy as np
from mfginv import PlantSpec, SolverParams, SpaceField, TorusGrid, make_planted, solve_mfg, _kernels
grid = TorusGrid(1, {N}, 0.1, {Nt})
F, G = make_planted(PlantSpec(2, 2, band=2, seed=0), grid)
x = grid.nodes[0]
m0 = (SpaceField(grid, 0.02 * np.cos(2 * np.pi * x)), SpaceField(grid, 0.01 + 0 * x))
solve_mfg(F, G, m0, SolverParams(tol=1e-12))
best = float("inf")
for _ in range({repeat}):
    t0 = time.perf_counter()
    solve_mfg(F, G, m0, SolverParams(tol=1e-12))
    best = min(best, time.perf_counter() - t0)
print(json.dumps({{"backend": _kernels.BACKEND, "solve_s": best}}))
"""


def sweep_times(N, Nt, batch, repeat):
    rng = np.random.default_rng(0)
    M = N
    src = rng.normal(size=(batch, Nt + 1, M)) + 1j * rng.normal(size=(batch, Nt + 1, M))
    init = rng.normal(size=(batch, M)) + 0j
    q = np.exp(-4 * np.pi**2 * np.arange(M) ** 2 * 0.1 / Nt)
    h = 0.1 / Nt
    rows = {}
    ref = _kernels.backward_sweep_numpy(src, init, q, h)
    if _kernels.HAS_NUMBA:
        got = _kernels.backward_sweep(src, init, q, h)
        rows["max_abs_diff"] = float(np.max(np.abs(got - ref)))
        _kernels.forward_sweep(src, init, q, h)
        rows["numba_backward_s"] = min(timeit.repeat(lambda: _kernels.backward_sweep(src, init, q, h), number=1, repeat=repeat))
        rows["numba_forward_s"] = min(timeit.repeat(lambda: _kernels.forward_sweep(src, init, q, h), number=1, repeat=repeat))
    rows["numpy_backward_s"] = min(timeit.repeat(lambda: _kernels.backward_sweep_numpy(src, init, q, h), number=1, repeat=repeat))
    rows["numpy_forward_s"] = min(timeit.repeat(lambda: _kernels.forward_sweep_numpy(src, init, q, h), number=1, repeat=repeat))
    return rows


def solve_time(N, Nt, repeat, numba):
    env = dict(os.environ, MFGINV_NUMBA="1" if numba else "0")
    code = _SOLVE_SNIPPET.format(N=N, Nt=Nt, repeat=repeat)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--Nt", type=int, default=2000)
    ap.add_argument("--batch", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    sweeps = sweep_times(args.N, args.Nt, args.batch, args.repeat)
    result = {"grid": {"N": args.N, "Nt": args.Nt, "batch": args.batch}, "sweeps": sweeps,
              "solve": [solve_time(args.N, args.Nt, args.repeat, nb) for nb in (True, False)]}
    print(json.dumps(result, indent=1))


if __name__ == "__main__":
    main()
