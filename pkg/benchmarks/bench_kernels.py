"""Compare the numpy and numba backends on the assembly kernels and a full solve.

    python3 benchmarks/bench_kernels.py [--nodes 200000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from wrinklevar._backend import HAVE_NUMBA
from wrinklevar._kernels import CHANGE_KERNELS, KERNELS
from wrinklevar.constitutive import MaterialParams
from wrinklevar.discretization import BoundarySpec, GridSpec
from wrinklevar.minimizer import (
    MinimizerConfig,
    extended_trace_state,
    minimize,
    perturb_out_of_plane,
)


def kernel_inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    z = 0.2 * rng.standard_normal((9, n))
    z[0] += 1.1
    z[3] += 0.95
    dz = 1e-3 * rng.standard_normal((9, n))
    return z, dz, rng.random(n)


def best(fn, repeat):
    fn()  # warm-up (includes numba compilation on first use)
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--grid", type=int, nargs=2, default=(64, 32))
    args = ap.parse_args()

    p = MaterialParams()
    z, dz, wq = kernel_inputs(args.nodes)
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    rows = []
    for be in backends:
        dens, change = KERNELS[be], CHANGE_KERNELS[be]
        t_grad = best(lambda: dens(*z, wq, p.c1, p.c2, p.D, p.nu, want_grad=True), args.repeat)
        t_val = best(lambda: dens(*z, wq, p.c1, p.c2, p.D, p.nu, want_grad=False), args.repeat)
        t_chg = best(lambda: change(z, dz, wq, p.c1, p.c2, p.D, p.nu), args.repeat)

        grid = GridSpec(args.grid[0], args.grid[1], 2.0, 1.0)
        bc = BoundarySpec(stretch=1.2)
        start = perturb_out_of_plane(extended_trace_state(grid, bc), 1e-2, 3, bc)
        cfg = MinimizerConfig(backend=be)
        res = [None]

        def solve():
            res[0] = minimize(start, p, None, bc, cfg)

        t_solve = best(solve, max(1, args.repeat // 2))
        rows.append((be, t_grad, t_val, t_chg, t_solve, res[0].iterations, res[0].energy.total))

    print(f"nodes={args.nodes} grid={args.grid[0]}x{args.grid[1]}")
    print(f"{'backend':8s} {'density+grad':>13s} {'density':>10s} {'change':>10s} {'solve':>9s} {'iters':>6s}  energy")
    for be, a, b, c, d, it, e in rows:
        print(f"{be:8s} {a * 1e3:11.2f}ms {b * 1e3:8.2f}ms {c * 1e3:8.2f}ms {d:8.3f}s {it:6d}  {e:.17g}")
    if len(rows) == 2:
        r = [rows[0][k] / rows[1][k] for k in (1, 2, 3, 4)]
        print("speedup  " + "  ".join(f"{x:.2f}x" for x in r))


if __name__ == "__main__":
    main()
