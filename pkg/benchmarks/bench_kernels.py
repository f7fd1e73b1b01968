#!/usr/bin/env python3
"""Timing comparison of the compiled and pure-Python kernel backends.

Builds a representative correction system (deep flat bottom, Gaussian bump)
and times each backend-dispatched kernel on it, plus a full preconditioned
Krylov solve through each backend.  Run from an environment where the
package is importable:

    python3 benchmarks/bench_kernels.py [--cells 96] [--repeats 5]
"""

import argparse
import time

import numpy as np

from sgnamr import _kernels, _kernels_py  # noqa: F401 (fails fast if missing)
from sgnamr.core import NGHOST, Patch, SimConfig
from sgnamr.sgn import build_patch_system
from sgnamr.swe import apply_domain_bc, extend_bathymetry


def build_system(m, depth=4000.0, dx=400.0):
    cfg = SimConfig(x_lo=0.0, x_hi=m * dx, y_lo=0.0, y_hi=m * dx,
                    mx=m, my=m,
                    bc_left="extrapolation", bc_right="extrapolation",
                    bc_bottom="extrapolation", bc_top="extrapolation")
    p = Patch(1, 0, 0, m, m, dx, dx, (0.0, 0.0))
    X, Y = np.meshgrid(p.x_centers(), p.y_centers(), indexing="ij")
    p.B[...] = -depth
    extend_bathymetry(p, cfg, (m, m))
    r2 = (X - m * dx / 2) ** 2 + (Y - m * dx / 2) ** 2
    p.h[...] = depth + 0.5 * np.exp(-r2 / (8 * dx) ** 2)
    apply_domain_bc(p, cfg, (m, m))
    p.eqn[...] = 1
    return build_patch_system(p, cfg, (m, m))


def best_of(repeats, fn):
    t = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        t = min(t, time.perf_counter() - t0)
    return t


def bench_backend(mod, A, b, repeats):
    n = A.shape[0]
    x = np.cos(0.37 * np.arange(n))
    out = np.empty(n)
    times = {}
    times["csr_matvec"] = best_of(
        repeats, lambda: mod.csr_matvec(A.indptr, A.indices, A.data, x, out))

    dp = A.diag_ptr()
    work = A.data.copy()
    def factor():
        work[:] = A.data
        mod.ilu0_factor(A.indptr, A.indices, work, dp)
    times["ilu0_factor"] = best_of(repeats, factor)

    sol = np.empty(n)
    times["ilu0_solve"] = best_of(
        repeats, lambda: mod.ilu0_solve(A.indptr, A.indices, work, dp, b, sol))
    return times, sol.copy()


def bench_solve(backend_name, A, b, repeats):
    """Full bicgstab+jacobi solve routed through one backend."""
    import sgnamr.backend as bk
    from sgnamr.linalg import make_preconditioner, solve_krylov

    mod = _kernels if backend_name == "compiled" else _kernels_py
    saved = bk.csr_matvec
    bk.csr_matvec = mod.csr_matvec
    try:
        M = make_preconditioner(A, "jacobi")
        def solve():
            solve_krylov(A, b, rtol=1e-9, maxit=2000, precond=M)
        return best_of(repeats, solve)
    finally:
        bk.csr_matvec = saved


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=96,
                    help="patch is CELLS x CELLS (default 96)")
    ap.add_argument("--repeats", type=int, default=5,
                    help="take the best of this many timings (default 5)")
    args = ap.parse_args(argv)

    A, b = build_system(args.cells)
    print(f"system: {A.shape[0]} unknowns, {A.nnz} nonzeros "
          f"({args.cells}x{args.cells} cells, two coupled components)")

    compiled, sol_c = bench_backend(_kernels, A, b, args.repeats)
    pure, sol_p = bench_backend(_kernels_py, A, b, args.repeats)
    agree = float(np.max(np.abs(sol_c - sol_p)))
    print(f"backend agreement (ilu0_solve output): max |diff| = {agree:.3e}")

    print(f"\n{'kernel':<14} {'compiled':>12} {'pure':>12} {'speedup':>9}")
    for name in compiled:
        tc, tp = compiled[name], pure[name]
        print(f"{name:<14} {tc * 1e3:>10.3f}ms {tp * 1e3:>10.3f}ms "
              f"{tp / tc:>8.1f}x")

    tc = bench_solve("compiled", A, b, args.repeats)
    tp = bench_solve("pure", A, b, args.repeats)
    print(f"{'krylov solve':<14} {tc * 1e3:>10.3f}ms {tp * 1e3:>10.3f}ms "
          f"{tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
