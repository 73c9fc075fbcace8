#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Times the two hot paths (RBF Gram assembly and per-scan TSDF frame
sampling) on realistic sizes, plus one end-to-end simulation as a sanity
check that the kernels dominate where expected.

    python3 benchmarks/bench_backends.py [--repeats N]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from gossipmap import _purepy
from gossipmap.sim import SimConfig, Simulation
from gossipmap.worlds import WorldSpec, synth_world

try:
    from gossipmap import _core
except ImportError:
    _core = None


def best_of(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_rbf(repeats):
    rng = np.random.RandomState(0)
    rows = []
    for n, m in ((50, 50), (500, 50), (2000, 50), (2000, 200)):
        a = rng.uniform(-5, 5, (n, 2))
        b = rng.uniform(-5, 5, (m, 2))
        t_py = best_of(lambda: _purepy.rbf_gram(a, b, 1.0, 0.1), repeats)
        t_c = (best_of(lambda: _core.rbf_gram(a, b, 1.0, 0.1), repeats)
               if _core else None)
        rows.append((f"rbf_gram {n}x{m}", t_py, t_c))
    return rows


def bench_frames(repeats):
    rng = np.random.RandomState(1)
    rows = []
    for beams in (180, 720):
        angles = np.linspace(-math.pi, math.pi, beams, endpoint=False)
        radii = 3.0 + 0.5 * np.sin(5 * angles) + 0.05 * rng.rand(beams)
        pts = np.column_stack([radii * np.cos(angles),
                               radii * np.sin(angles)])
        valid = np.ones(beams, dtype=np.uint8)
        args = (pts, valid, 0.0, 0.0, 0.5, 0.1, 1, 0.5)
        t_py = best_of(lambda: _purepy.frame_samples(*args), repeats)
        t_c = (best_of(lambda: _core.frame_samples(*args), repeats)
               if _core else None)
        rows.append((f"frame_samples {beams} beams", t_py, t_c))
    return rows


def bench_sim(repeats):
    spec = WorldSpec.from_dict({
        "world": "two_rooms",
        "paths": [[[1.5, 1.5], [1.5, 6.5]], [[10.5, 1.5], [10.5, 6.5]],
                  [[4.5, 1.5], [7.5, 1.5]]],
        "steps": 10, "beams": 180, "max_range": 15.0,
    })
    scans, _ = synth_world(spec)
    cfg = SimConfig(n=3, steps=10, comm_range=6.0, metrics_every=0,
                    eval_resolution=0.25)

    def run():
        sim = Simulation(cfg, scans=scans)
        sim.run()
        sim.compute_metrics(9)

    return [("sim 3 robots x 10 steps", best_of(run, max(1, repeats // 3)),
             None)]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if _core is None:
        print("compiled extension not available; timing the fallback only\n")

    rows = bench_rbf(args.repeats) + bench_frames(args.repeats)
    rows += bench_sim(args.repeats)

    width = max(len(r[0]) for r in rows)
    header = f"{'case':<{width}}  {'numpy':>10}  {'compiled':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, t_py, t_c in rows:
        py_ms = f"{t_py * 1e3:9.3f}ms"
        if t_c is None:
            print(f"{name:<{width}}  {py_ms}  {'-':>10}  {'-':>8}")
        else:
            c_ms = f"{t_c * 1e3:9.3f}ms"
            print(f"{name:<{width}}  {py_ms}  {c_ms}  {t_py / t_c:7.2f}x")


if __name__ == "__main__":
    main()
