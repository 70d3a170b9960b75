"""Compare the compiled and numpy kernel backends.

Times one objective-plus-gradient evaluation (the optimizer's inner step)
and one full optimization for a range of surface sizes, and checks that both
backends return the same numbers.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--json out.json]
"""

import argparse
import json
import math
import timeit

import numpy as np

from nrris import _backend
from nrris import beamopt as bo


def _spec(step):
    grid = np.radians(np.round(np.arange(-90, 90 + step / 2, step), 10))
    r = math.radians
    return bo.BeamSpec.box(r(20), r(40), r(40), r(-50), grid=grid, halfwidth=r(0.5))


def bench_kernel(backend, N, spec, repeat):
    kern = _backend.load(backend)
    F = bo.build_quadratic_forms(spec, N, backend=backend)
    h = F.dl.handle
    phi = np.exp(2j * np.pi * np.random.default_rng(0).random(N))
    grad = np.zeros(N, complex)

    def step():
        grad[:] = 0
        return kern.profiled_terms(h, spec.p_dl, phi, grad)

    f, _ = step()
    t = min(timeit.repeat(step, number=1, repeat=repeat))
    return t, f, grad.copy()


def bench_optimize(backend, N, spec):
    t = timeit.default_timer()
    tr = bo.optimize(spec, N, seed=0, restarts=1, max_iters=200, backend=backend)
    return timeit.default_timer() - t, tr.final_objective


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--sizes", type=int, nargs="+", default=[48, 96, 192, 384])
    ap.add_argument("--step", type=float, default=0.5, help="grid step in degrees")
    ap.add_argument("--json", help="write results to this file")
    args = ap.parse_args(argv)

    try:
        _backend.load("cython")
    except ImportError:
        raise SystemExit("compiled kernels are not built; run pip install -e . first")

    spec = _spec(args.step)
    rows = []
    print(f"grid L={spec.L}")
    print(f"{'N':>5} {'python us':>10} {'cython us':>10} {'speedup':>8} "
          f"{'opt py s':>9} {'opt cy s':>9} {'max rel diff':>13}")
    for N in args.sizes:
        tp, fp, gp = bench_kernel("python", N, spec, args.repeat)
        tc, fc, gc = bench_kernel("cython", N, spec, args.repeat)
        op, objp = bench_optimize("python", N, spec)
        oc, objc = bench_optimize("cython", N, spec)
        diff = max(abs(fc - fp) / abs(fp), np.abs(gc - gp).max() / np.abs(gp).max(),
                   abs(objc - objp) / abs(objp))
        rows.append(dict(N=N, L=spec.L, python_s=tp, cython_s=tc, speedup=tp / tc,
                         optimize_python_s=op, optimize_cython_s=oc, max_rel_diff=diff))
        print(f"{N:5d} {tp * 1e6:10.1f} {tc * 1e6:10.1f} {tp / tc:8.2f} "
              f"{op:9.3f} {oc:9.3f} {diff:13.1e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
