"""Time the compiled transport kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--points 4096] [--batch 8] [--repeat 7]

Also times a short torus simulation under each backend, in a subprocess
so that SALTNS_BACKEND takes effect at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from saltns.kernels import implementation

SIM = """
import time
from saltns.sde import SdeConfig, build_setup, run
cfg = SdeConfig(geometry="torus", K=16, G=64, dt=2**-8, T=0.25, xi_M=4, seed=1)
setup = build_setup(cfg)
t0 = time.perf_counter()
run(cfg, setup=setup)
print(time.perf_counter() - t0)
"""


def kernel_args(rng, B, P):
    return {
        "advect_grid": (rng.standard_normal((B, 2, P)), rng.standard_normal((B, 2, 2, P))),
        "stretch_grid": (rng.standard_normal((B, 2, P)), rng.standard_normal((2, 2, P))),
        "salt_grid": (rng.standard_normal((2, P)), rng.standard_normal((2, 2, P)),
                      rng.standard_normal((B, 2, P)), rng.standard_normal((B, 2, 2, P))),
    }


def bench_kernels(points, batch, repeat):
    rng = np.random.default_rng(0)
    args = kernel_args(rng, batch, points)
    print(f"kernels  B={batch} P={points}  best of {repeat} (ms)")
    print(f"{'kernel':14s} {'python':>10s} {'compiled':>10s} {'speedup':>8s}")
    for name, a in args.items():
        times = {}
        for backend in ("python", "compiled"):
            fn = getattr(implementation(backend), name)
            number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(*a), number=1), 1e-6)))
            times[backend] = min(timeit.repeat(lambda: fn(*a), number=number, repeat=repeat)) / number * 1e3
        print(f"{name:14s} {times['python']:10.3f} {times['compiled']:10.3f} {times['python'] / times['compiled']:8.2f}")


def bench_simulation():
    print("torus K=16 G=64, 64 steps (s)")
    for backend in ("python", "compiled"):
        env = dict(os.environ, SALTNS_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", SIM], env=env, capture_output=True, text=True, check=True)
        print(f"{backend:9s} {float(out.stdout.strip()):.3f}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=4096)
    ap.add_argument("--batch", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--skip-simulation", action="store_true")
    args = ap.parse_args(argv)
    bench_kernels(args.points, args.batch, args.repeat)
    if not args.skip_simulation:
        bench_simulation()


if __name__ == "__main__":
    main()
