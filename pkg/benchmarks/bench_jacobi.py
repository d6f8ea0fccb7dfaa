"""Compare the numba and pure-numpy Jacobi kernels.

Runs the same eigendecompositions and singular-value problems in two
subprocesses, one per backend (selected via OVERSMOOTH_NUMBA), and
prints a timing table.  The first numba call includes JIT compilation;
a warmup run is excluded from the timings.

Usage: python benchmarks/bench_jacobi.py [--sizes 50,100,200] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json, sys, time
import numpy as np
from oversmooth._jacobi import BACKEND, jacobi_eigh, jacobi_singular_values

sizes = json.loads(sys.argv[1])
repeat = int(sys.argv[2])
rng = np.random.default_rng(0)

# warmup (first numba call pays JIT compilation)
m = rng.normal(size=(8, 8)); m = m + m.T
jacobi_eigh(m)
jacobi_singular_values(rng.normal(size=(16, 4)))

results = {"backend": BACKEND, "eigh": {}, "svals": {}}
for n in sizes:
    m = rng.normal(size=(n, n)); m = (m + m.T) / 2.0
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        jacobi_eigh(m)
        times.append(time.perf_counter() - t0)
    results["eigh"][n] = min(times)
    x = rng.normal(size=(n, max(4, n // 8)))
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        jacobi_singular_values(x)
        times.append(time.perf_counter() - t0)
    results["svals"][n] = min(times)
print(json.dumps(results))
"""


def run_backend(enabled: bool, sizes, repeat):
    env = dict(os.environ, OVERSMOOTH_NUMBA="1" if enabled else "0")
    out = subprocess.run(
        [sys.executable, "-c", _WORKER, json.dumps(sizes), str(repeat)],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="50,100,200")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    numba_res = run_backend(True, sizes, args.repeat)
    numpy_res = run_backend(False, sizes, args.repeat)
    if numba_res["backend"] != "numba":
        print("warning: numba unavailable, both runs used numpy")

    print(f"{'kernel':<8} {'n':>5} {'numpy [s]':>12} {'numba [s]':>12} "
          f"{'speedup':>8}")
    for kind in ("eigh", "svals"):
        for n in sizes:
            a = numpy_res[kind][str(n)]
            b = numba_res[kind][str(n)]
            print(f"{kind:<8} {n:>5} {a:>12.4f} {b:>12.4f} {a / b:>8.1f}x")


if __name__ == "__main__":
    main()
