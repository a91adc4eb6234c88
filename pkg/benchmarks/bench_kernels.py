"""Time the compiled kernels against the pure-Python reference.

    python benchmarks/bench_kernels.py [--repeat 3] [--quick]

Each case runs both backends on identical inputs, checks the outputs agree
bit for bit, and prints the best-of-``repeat`` wall time and the speed-up.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from mildbbm import kernels
from mildbbm.asymptotics import ModelParams
from mildbbm.environment import sample_environment


def _cases(quick: bool):
    scale = 0.5 if quick else 1.0
    p = ModelParams(1.0, 0.5, 0.0, 1.0)
    f1 = sample_environment(1, p, 40.0, seed=1).kernel_arrays()
    f2 = sample_environment(2, ModelParams(0.5, 0.5, 0.0, 1.0), 20.0, seed=2).kernel_arrays()
    pts = np.random.default_rng(0).uniform(-20, 20, size=(int(200_000 * scale), 2))
    t_free = 5.0 if quick else 6.0
    n_paths = int(2000 * scale)
    reps = 10 if quick else 20
    return [
        ("free BBM d=1, t=%g, %d reps" % (t_free, reps),
         lambda m: [kernels.simulate_bbm(s, 1, 1.0, 1.0, [t_free], impl=m) for s in range(reps)]),
        ("obstacle BBM d=1, t=8, %d reps" % reps,
         lambda m: [kernels.simulate_bbm(s, 1, 0.0, 1.0, [8.0], field=f1, impl=m)
                    for s in range(reps)]),
        ("free BBM d=3, no extent, t=%g, %d reps" % (t_free, reps),
         lambda m: [kernels.simulate_bbm(s, 3, 1.0, 1.0, [t_free], track_extent=False, impl=m)
                    for s in range(reps)]),
        ("Feynman-Kac paths d=2, %d x 1536 steps" % n_paths,
         lambda m: kernels.fk_occupation(4, f2, 2, 1536, 1 / 256, n_paths, False, impl=m)),
        ("ball exit paths d=2, %d x 512 steps" % n_paths,
         lambda m: kernels.advance_paths(5, np.zeros((n_paths, 2)), np.ones(n_paths, bool),
                                         1.0, 512, 1 / 256, impl=m)),
        ("membership queries d=2, %d points" % len(pts),
         lambda m: m.contains(f2, pts)),
    ]


def _best(fn, repeat: int):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _equal(a, b) -> bool:
    if isinstance(a, dict):
        return all(_equal(a[k], b[k]) for k in a)
    if isinstance(a, (tuple, list)):
        return all(_equal(x, y) for x, y in zip(a, b))
    x, y = np.asarray(a), np.asarray(b)
    return x.shape == y.shape and np.array_equal(x, y, equal_nan=x.dtype.kind == "f")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args(argv)
    py = kernels.backend_module("python")
    try:
        cy = kernels.backend_module("cython")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return 1
    print(f"{'case':46s} {'python s':>10s} {'cython s':>10s} {'speed-up':>9s}  same")
    for name, fn in _cases(args.quick):
        tp, op = _best(lambda: fn(py), 1)
        tc, oc = _best(lambda: fn(cy), args.repeat)
        print(f"{name:46s} {tp:10.3f} {tc:10.4f} {tp / tc:8.1f}x  {_equal(op, oc)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
