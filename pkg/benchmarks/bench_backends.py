#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the pure-Python fallback.

Times the two hot paths: the full fuzzy scheduling pass (fuzzify -> infer ->
defuzzify, twice per call) and the nonlinear plant RK4 step, plus a composed
closed-loop scenario run. Usage:

    python benchmarks/bench_backends.py [--repeat N]
"""

import argparse
import math
import time

import numpy as np

from pitchstab._kernels import available_backends
from pitchstab.fuzzy import default_scheduler


def time_fn(fn, n):
    start = time.perf_counter()
    for _ in range(n):
        fn()
    return (time.perf_counter() - start) / n


def bench_schedule(backend, n=20000):
    sched = default_scheduler()
    angle = sched.angle_partition._corners
    vel = sched.velocity_partition._corners
    gain_a = sched.angle_gain_partition._corners
    gain_v = sched.velocity_gain_partition._corners
    rules_a = sched.angle_gain_rules._flat0
    rules_v = sched.velocity_gain_rules._flat0
    rng = np.random.default_rng(0)
    thetas = rng.uniform(-40.0, 40.0, n)
    rates = rng.uniform(-5.0, 5.0, n)

    start = time.perf_counter()
    for theta, rate in zip(thetas, rates):
        deg_a = backend.fuzzify(angle, 4, theta)
        deg_v = backend.fuzzify(vel, 3, rate)
        deg_a = np.ascontiguousarray(deg_a, dtype=float)
        deg_v = np.ascontiguousarray(deg_v, dtype=float)
        y_a = np.ascontiguousarray(backend.infer(rules_a, 4, 3, deg_a, deg_v, 3), dtype=float)
        y_v = np.ascontiguousarray(backend.infer(rules_v, 4, 3, deg_a, deg_v, 3), dtype=float)
        backend.union_centroid(gain_a, 3, y_a)
        backend.union_centroid(gain_v, 3, y_v)
    return (time.perf_counter() - start) / n


def bench_rk4(backend, n=200000):
    args = (0.1, -0.5, 0.05, 0.2, 0.024, 39.24, 28.0, 35.2, 3.0, 20.0, 0.0)
    start = time.perf_counter()
    theta, omega, ankle = 0.1, -0.5, 0.05
    for _ in range(n):
        theta, omega, ankle = backend.pendulum_rk4(theta, omega, ankle, *args[3:])
        theta = math.fmod(theta, 0.5)
    return (time.perf_counter() - start) / n


def bench_scenario(force_pure):
    """Full closed-loop run, backend chosen through the env override."""
    import os
    import subprocess
    import sys

    code = (
        "import time\n"
        "from pitchstab.harness import load_scenario, run_scenario\n"
        "cfg = load_scenario('configs/scenario_standing_push.json')\n"
        "run_scenario(cfg)\n"
        "start = time.perf_counter()\n"
        "for _ in range(20): run_scenario(cfg)\n"
        "print((time.perf_counter() - start) / 20)\n"
    )
    env = dict(os.environ)
    if force_pure:
        env["PITCHSTAB_PURE_PYTHON"] = "1"
    else:
        env.pop("PITCHSTAB_PURE_PYTHON", None)
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=1)
    args = parser.parse_args()

    backends = available_backends()
    print(f"{'kernel':<24}" + "".join(f"{b.BACKEND:>14}" for b in backends) + f"{'speedup':>10}")

    for name, bench, scale in (("schedule_gains pass", bench_schedule, 1e6),
                               ("pendulum RK4 step", bench_rk4, 1e9)):
        rows = []
        for backend in backends:
            best = min(bench(backend) for _ in range(args.repeat))
            rows.append(best)
        unit = "us" if scale == 1e6 else "ns"
        cells = "".join(f"{r * scale:>12.2f}{unit}" for r in rows)
        speedup = rows[-1] / rows[0] if len(rows) > 1 else 1.0
        print(f"{name:<24}{cells}{speedup:>9.1f}x")

    times = []
    for pure in (False, True):
        if pure and len(backends) == 1:
            continue
        times.append(bench_scenario(pure))
    if len(times) == 2:
        print(f"{'closed-loop scenario':<24}{times[0] * 1e3:>12.2f}ms{times[1] * 1e3:>12.2f}ms"
              f"{times[1] / times[0]:>9.1f}x")


if __name__ == "__main__":
    main()
