"""Time the stencil kernels on both backends and one end-to-end see-saw run.

    python3 benchmarks/bench_kernels.py --sizes 256 4096 65536 --repeat 50
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from rg2flow import kernels

E2E = """
import time, math, numpy as np
from rg2flow.fields import DriftField
from rg2flow.flow import FlowState, harmonic_drift, seesaw_solve
from rg2flow.geometry import WarpedTorus
N = {N}
r = np.arange(N) * 2 * math.pi / N
g = WarpedTorus(2 * math.pi, 1 + 0.1 * np.cos(r), 1 + 0.2 * np.sin(r))
f = math.log(4 * math.pi**2) + 0.3 * np.cos(r)
s = FlowState.initial(g, f, DriftField.from_parts(g, 0.2 * np.sin(r), harmonic_drift(g, f, 0.03)))
seesaw_solve(s, 2e-4, 1e-4)  # warm-up and JIT
t = time.perf_counter()
seesaw_solve(s, 5e-3, 1e-4)
print(time.perf_counter() - t)
"""


def kernel_args(name, n, rng):
    x = rng.normal(size=n)
    pos = 1.0 + rng.random(size=n)
    h = 2 * np.pi / n
    return {
        "edge_mean": (x,),
        "node_mean": (x,),
        "edge_diff": (x, h),
        "node_diff": (x, h),
        "central_diff": (x, h),
        "flux_laplacian": (x, pos, pos, h),
        "gauss_curvature": (pos, pos, h),
        "density_rhs": (pos, pos, pos, x, h),
    }[name]


def bench_kernels(sizes, repeat):
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'N':>8}{'numpy us':>12}{'numba us':>12}{'speed-up':>10}")
    for name in kernels._NAMES:
        for n in sizes:
            args = kernel_args(name, n, rng)
            fn_np = getattr(kernels.NUMPY_KERNELS, name)
            fn_nb = getattr(kernels.NUMBA_KERNELS, name)
            fn_nb(*args)  # compile
            t_np = min(timeit.repeat(lambda: fn_np(*args), number=repeat, repeat=3)) / repeat
            t_nb = min(timeit.repeat(lambda: fn_nb(*args), number=repeat, repeat=3)) / repeat
            print(f"{name:<16}{n:>8}{t_np * 1e6:>12.2f}{t_nb * 1e6:>12.2f}{t_np / t_nb:>10.2f}")


def bench_end_to_end(N):
    times = {}
    for label, flag in (("numpy", "1"), ("numba", "")):
        env = dict(os.environ, RG2FLOW_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", E2E.format(N=N)], env=env,
                             capture_output=True, text=True, check=True)
        times[label] = float(out.stdout.strip())
    print(f"see-saw N={N}, 50 steps: numpy {times['numpy']:.3f} s, numba {times['numba']:.3f} s")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 4096, 65536])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--e2e-grid", type=int, default=128)
    args = ap.parse_args()
    if kernels.NUMBA_KERNELS is None:
        sys.exit("numba is not installed")
    bench_kernels(args.sizes, args.repeat)
    bench_end_to_end(args.e2e_grid)


if __name__ == "__main__":
    main()
