"""Benchmark the compiled kernels against the pure-Python reference.

Usage: python benchmarks/bench_kernels.py [--events N] [--walks N]
Both backends consume identical event streams, so the final configurations
are asserted equal before any number is reported.
"""

import argparse
import time

import numpy as np

from zrpsim import _kernels_py
from zrpsim.dynamics import EventStream, evolve
from zrpsim.environment import EnvDistribution, JumpKernel, sample_environment
from zrpsim.measures import GEOMETRIC, sample_product_measure
from zrpsim.rng import derive_seed
from zrpsim.walkers import run_walk_batch

try:
    from zrpsim import _kernels_cy
except ImportError:
    _kernels_cy = None

import zrpsim.kernels as kernels


def bench_evolve(n_events: int) -> dict:
    dist = EnvDistribution(c=0.2, beta=3.0)
    n_sites = 4096
    field = sample_environment(dist, n_sites, seed=42)
    kernel = JumpKernel.nearest_neighbor(1)
    rng = np.random.Generator(np.random.PCG64(7))
    occ0 = sample_product_measure(field, 0.15, GEOMETRIC, rng)
    t_end = n_events / n_sites

    results = {}
    finals = {}
    for name, impl in _backends():
        kernels.evolve_zrp = impl.evolve_zrp
        stream = EventStream(99, n_sites, kernel)
        t0 = time.perf_counter()
        finals[name] = evolve(occ0, field, None, t_end, stream, GEOMETRIC)
        results[name] = n_events / (time.perf_counter() - t0)
    kernels.evolve_zrp = _default().evolve_zrp
    if len(finals) == 2:
        assert np.array_equal(finals["python"], finals["cython"]), \
            "backends disagree"
    return results


def bench_walks(n_walks: int) -> dict:
    kernel = JumpKernel.nearest_neighbor(1)
    theta = 0.25
    starts = np.full((n_walks, 1), 8, dtype=np.int64)
    env = np.array([derive_seed(1, r) for r in range(n_walks)], dtype=np.uint64)
    wlk = np.array([derive_seed(2, r) for r in range(n_walks)], dtype=np.uint64)

    results = {}
    taus = {}
    for name, impl in _backends():
        kernels.run_walks = impl.run_walks
        t0 = time.perf_counter()
        batch = run_walk_batch(starts, env, wlk, kernel, theta, 800)
        results[name] = n_walks / (time.perf_counter() - t0)
        taus[name] = batch.tau
    kernels.run_walks = _default().run_walks
    if len(taus) == 2:
        assert np.array_equal(taus["python"], taus["cython"])
    return results


def _backends():
    out = [("python", _kernels_py)]
    if _kernels_cy is not None:
        out.append(("cython", _kernels_cy))
    return out


def _default():
    return _kernels_cy if _kernels_cy is not None else _kernels_py


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--events", type=int, default=2_000_000)
    ap.add_argument("--walks", type=int, default=50_000)
    args = ap.parse_args()

    print(f"event kernel ({args.events} events, 4096-site ring):")
    ev = bench_evolve(args.events)
    for name, rate in ev.items():
        print(f"  {name:<7} {rate / 1e6:8.2f} M events/s")
    if len(ev) == 2:
        print(f"  speedup {ev['cython'] / ev['python']:8.1f} x")

    print(f"walk kernel ({args.walks} absorbed walks):")
    wk = bench_walks(args.walks)
    for name, rate in wk.items():
        print(f"  {name:<7} {rate / 1e3:8.2f} K walks/s")
    if len(wk) == 2:
        print(f"  speedup {wk['cython'] / wk['python']:8.1f} x")


if __name__ == "__main__":
    main()
