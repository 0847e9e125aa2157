"""Time the compiled kernel against the pure-Python one.

    python benchmarks/bench_kernel.py [--p 3] [--gammas 66] [--repeat 3]

Each backend is loaded in its own subprocess (the backend is fixed at
import) and evaluates baseline coverage on an even gamma grid.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

SNIPPET = """
import json, sys, time
import numpy as np
from rcsphere import kernel
from rcsphere.known import RcsKnown, coverage
p, n, repeat = int(sys.argv[1]), int(sys.argv[2]), int(sys.argv[3])
rcs = RcsKnown.baseline(p)
grid = np.linspace(0.0, 65.0, n)
best = float("inf")
for _ in range(repeat):
    t = time.perf_counter()
    cov = coverage(grid, rcs)
    best = min(best, time.perf_counter() - t)
print(json.dumps({"backend": kernel.BACKEND, "seconds": best, "checksum": float(np.sum(cov))}))
"""


def run(backend: str, p: int, n: int, repeat: int) -> dict:
    env = {**os.environ, "RCSPHERE_KERNEL": backend}
    out = subprocess.run([sys.executable, "-c", SNIPPET, str(p), str(n), str(repeat)],
                         env=env, check=True, capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=int, default=3)
    ap.add_argument("--gammas", type=int, default=66)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run("compiled", args.p, args.gammas, args.repeat)
    slow = run("python", args.p, max(2, args.gammas // 11), 1)
    # the python run uses fewer gammas; compare per-gamma cost
    per_fast = fast["seconds"] / args.gammas
    per_slow = slow["seconds"] / max(2, args.gammas // 11)
    print(f"compiled: {per_fast * 1e3:9.3f} ms per gamma")
    print(f"python:   {per_slow * 1e3:9.3f} ms per gamma")
    print(f"speedup:  {per_slow / per_fast:9.1f}x")


if __name__ == "__main__":
    main()
