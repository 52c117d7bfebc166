#!/usr/bin/env python3
"""Benchmark the compiled spectrum-scan kernel against the numpy fallback.

Times free_blocks_on_path over randomized occupancy at simulator-realistic
shapes, then a serve()-level comparison on the bundled US backbone.

Run: python3 benchmarks/bench_kernels.py
"""

import os
import sys
import time
from importlib import resources

import numpy as np

from flexrsa import _kernels_py

try:
    from flexrsa import _kernels_c
except ImportError:
    _kernels_c = None


def time_kernel(kernel, occ, paths, gb, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for arcs in paths:
            kernel.free_blocks_on_path(occ, arcs, gb)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernel_scan():
    rng = np.random.default_rng(12345)
    cases = [
        ("84 arcs x 16 slots, 3-arc paths", 84, 16, 3),
        ("84 arcs x 128 slots, 4-arc paths", 84, 128, 4),
        ("84 arcs x 128 slots, 8-arc paths", 84, 128, 8),
    ]
    calls = 20_000
    print(f"kernel scan: {calls} calls per measurement, best of 5")
    print(f"{'case':<36} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for label, n_arcs, slots, path_len in cases:
        occ = (rng.random((n_arcs, slots)) < 0.4).astype(np.uint8)
        paths = [
            np.sort(rng.choice(n_arcs, size=path_len, replace=False)).astype(np.int64)
            for _ in range(calls)
        ]
        t_py = time_kernel(_kernels_py, occ, paths, gb=1)
        if _kernels_c is None:
            print(f"{label:<36} {t_py * 1e3:>8.1f}ms {'n/a':>10} {'n/a':>8}")
            continue
        t_c = time_kernel(_kernels_c, occ, paths, gb=1)
        for arcs in paths[:200]:  # sanity: identical answers
            assert _kernels_c.free_blocks_on_path(occ, arcs, 1) == \
                _kernels_py.free_blocks_on_path(occ, arcs, 1)
        print(f"{label:<36} {t_py * 1e3:>8.1f}ms {t_c * 1e3:>8.1f}ms {t_py / t_c:>7.1f}x")


def bench_serve(env_value, label):
    """End-to-end serve loop with the kernel forced via environment."""
    import subprocess

    code = r"""
import time
from importlib import resources
from flexrsa import spectrum
from flexrsa.heuristic import PolicyParams
from flexrsa.sim import TrafficConfig, run
from flexrsa.topology import load_topology

net = load_topology(
    resources.files("flexrsa").joinpath("data/us_backbone.txt").read_text(),
    slots_per_link=128,
)
traffic = TrafficConfig(mean_holding=90.0, requests=8000, seed=0, demand=10)
policy = PolicyParams(mode="pt", k=30, gb=0)
t0 = time.perf_counter()
m = run(net, traffic, policy)
print(f"{spectrum.KERNEL_IMPL} {time.perf_counter() - t0:.2f} {m.blocking_prob:.6f}")
"""
    env = dict(os.environ)
    if env_value:
        env["FLEXRSA_PURE_KERNELS"] = env_value
    else:
        env.pop("FLEXRSA_PURE_KERNELS", None)
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
    ).stdout.split()
    impl, seconds, blocking = out[0], float(out[1]), out[2]
    print(f"serve loop ({label:>8}, impl={impl}): {seconds:6.2f}s  blocking={blocking}")
    return impl, seconds, blocking


def main():
    bench_kernel_scan()
    print()
    print("end-to-end: 8000 requests, US backbone, |F|=128, pt K=30")
    impl_a, t_a, b_a = bench_serve("", "default")
    impl_b, t_b, b_b = bench_serve("1", "pure")
    if impl_a != impl_b:
        assert b_a == b_b, "kernels disagree on simulation output"
        print(f"speedup: {t_b / t_a:.2f}x, identical metrics")


if __name__ == "__main__":
    main()
