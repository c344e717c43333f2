"""Throughput comparison: compiled kernels vs the pure-Python reference.

Run with:  python benchmarks/bench_kernels.py [--n-poisson N] [--n-fluid N]

Both backends are bit-identical; this measures the speed gap on the two hot
loops (event-driven Poisson paths under the designed risky policy, and Euler
fluid paths below the threshold).
"""

import argparse
import importlib
import math
import time

ALPHA0 = 0.09838692892654663
ALPHA1 = 0.37643799724946125


def _load_backends():
    backends = {}
    from qstream.kernels import pykernels
    backends["python"] = pykernels
    try:
        fast = importlib.import_module("qstream.kernels._fast")
        backends["compiled"] = fast
    except ImportError:
        pass
    return backends


def bench_poisson(mod, n):
    t0 = time.perf_counter()
    flags, cost, events = mod.poisson_paths(
        4, 23.336834108702611, 20.0, 1.05, 1.2, ALPHA0, ALPHA1,
        True, math.inf, math.inf, n, 12345, 0, 10**9)
    elapsed = time.perf_counter() - t0
    return elapsed, int(events.sum())


def bench_fluid(mod, n):
    t0 = time.perf_counter()
    flags, cost, steps = mod.fluid_paths(
        10.0, 5.0, 1.05, 1.2, 1e-3, True, n, 12345, 0, 10**9)
    elapsed = time.perf_counter() - t0
    return elapsed, int(steps.sum())


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--n-poisson", type=int, default=20000)
    parser.add_argument("--n-fluid", type=int, default=300)
    args = parser.parse_args()

    backends = _load_backends()
    print(f"{'kernel':<10} {'backend':<10} {'paths':>8} {'units':>12} "
          f"{'time [s]':>10} {'units/s':>12}")
    rates = {}
    for name, mod in backends.items():
        elapsed, units = bench_poisson(mod, args.n_poisson)
        rates[("poisson", name)] = units / elapsed
        print(f"{'poisson':<10} {name:<10} {args.n_poisson:>8} {units:>12} "
              f"{elapsed:>10.3f} {units / elapsed:>12.0f}")
    for name, mod in backends.items():
        elapsed, units = bench_fluid(mod, args.n_fluid)
        rates[("fluid", name)] = units / elapsed
        print(f"{'fluid':<10} {name:<10} {args.n_fluid:>8} {units:>12} "
              f"{elapsed:>10.3f} {units / elapsed:>12.0f}")
    if ("poisson", "compiled") in rates:
        for kernel in ("poisson", "fluid"):
            speedup = rates[(kernel, "compiled")] / rates[(kernel, "python")]
            print(f"{kernel}: compiled is {speedup:.0f}x the python backend")


if __name__ == "__main__":
    main()
