"""Time the hot kernels under both backends.

Each backend runs in its own interpreter because the choice is made at
import time from ``TEXFUSE_BACKEND``. Usage::

    python3 benchmarks/bench_backends.py [--size 96] [--repeats 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from texfuse import backend_name
from texfuse.classify import train_linear_svm_ovr
from texfuse.densesift import PatchGridConfig, extract_image_rootsifts
from texfuse.lbp import LbpConfig, lbp_code_map
from texfuse.pricolbp import TemplateSet, pricolbp_descriptor

size, repeats = int(sys.argv[1]), int(sys.argv[2])
rng = np.random.default_rng(0)
img = rng.uniform(0, 255, (size, size))
X = rng.normal(size=(400, 200))
y = rng.integers(0, 4, 400)
jobs = {
    "lbp_codes": lambda: lbp_code_map(img, LbpConfig(8, 1)),
    "pricolbp": lambda: pricolbp_descriptor(img, LbpConfig(), TemplateSet.preset("ten")),
    "dense_sift": lambda: extract_image_rootsifts(img, PatchGridConfig(41, 2, (1.5, 2.25))),
    "svm_dcd": lambda: train_linear_svm_ovr(X, y, C=1.0),
}
out = {"backend": backend_name()}
for name, job in jobs.items():
    job()  # warm-up, includes jit compilation
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        job()
        times.append(time.perf_counter() - t0)
    out[name] = min(times)
print(json.dumps(out))
"""


def run(backend, size, repeats):
    env = dict(os.environ, TEXFUSE_BACKEND=backend)
    res = subprocess.run([sys.executable, "-c", WORKER, str(size), str(repeats)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=96)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    a = run("numba", args.size, args.repeats)
    b = run("numpy", args.size, args.repeats)
    print(f"{'kernel':12s} {'numba s':>10s} {'numpy s':>10s} {'speed-up':>9s}")
    for k in a:
        if k == "backend":
            continue
        print(f"{k:12s} {a[k]:10.4f} {b[k]:10.4f} {b[k] / a[k]:8.1f}x")


if __name__ == "__main__":
    main()
