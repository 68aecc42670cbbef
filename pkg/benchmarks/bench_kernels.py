#!/usr/bin/env python3
"""Benchmark the compiled kernel backend against the pure-Python twin.

Times (a) raw derivative evaluations of the stacked vehicle states and
(b) a short closed-loop reference run through each backend.

Run:  python benchmarks/bench_kernels.py
"""

import os
import time

import numpy as np


def bench_rhs(impl, n_vehicles=3, reps=20000):
    rng = np.random.default_rng(0)
    params = np.tile(
        np.array([34.0, 66.0, 2.0, 66.0, -2.0, 18.0, 18.0,
                  3.4, 33.0, 3.0, 33.0, -3.0, -3.0, 6.0, 3.0, 6.0, 6.2784]),
        (n_vehicles, 1),
    )
    state = np.zeros((n_vehicles, 37))
    state[:, 3] = rng.uniform(-0.5, 0.5, n_vehicles)
    state[:, 4] = rng.uniform(-1, 1, n_vehicles)
    state[:, 5:10] = rng.uniform(-1, 1, (n_vehicles, 5))
    state[:, 31] = 1.0
    v_c = np.array([0.0, 0.25, 0.05])
    raw = np.tile([1.0, 0.1, 0.2], (n_vehicles, 1))
    gains = np.array([0.05, 0.1, 5.0, 0.0625, 0.25, 0.1, 0.75, 1.0,
                      0.0625, 0.25, 0.75, 1.0, 0.01, 2.0])
    out = np.empty_like(state)
    impl.fleet_rhs(params, state, v_c, raw, gains, None, out)  # warm up
    t0 = time.perf_counter()
    for _ in range(reps):
        impl.fleet_rhs(params, state, v_c, raw, gains, None, out)
    return (time.perf_counter() - t0) / reps


def bench_run(backend_env, t_end=30.0):
    import subprocess
    import sys

    code = (
        "import time\n"
        "from auvformation.config import load_scenario\n"
        "from auvformation.engine import Simulator\n"
        "from auvformation import kernels\n"
        f"scn = load_scenario(None, overrides=['t_end={t_end}'])\n"
        "t0 = time.perf_counter()\n"
        "Simulator(scn).run()\n"
        "print(kernels.BACKEND, time.perf_counter() - t0)\n"
    )
    env = dict(os.environ)
    env["AUVFORMATION_PURE"] = backend_env
    res = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, env=env
    )
    backend, elapsed = res.stdout.split()
    return backend, float(elapsed)


def main():
    from auvformation.kernels import _pure

    rows = [("pure", bench_rhs(_pure))]
    try:
        from auvformation.kernels import _core

        rows.append(("compiled", bench_rhs(_core)))
    except ImportError:
        print("compiled backend not built; benchmarking pure only")

    print(f"{'backend':10s} {'fleet_rhs (3 vehicles)':>24s}")
    for name, dt in rows:
        print(f"{name:10s} {dt * 1e6:,.2f} us")
    if len(rows) == 2:
        print(f"speedup: {rows[0][1] / rows[1][1]:.1f}x")

    print("\nclosed-loop reference run (30 s simulated):")
    for env_flag in ("1", "0"):
        backend, elapsed = bench_run(env_flag)
        print(f"{backend:10s} {elapsed:8.2f} s wall")


if __name__ == "__main__":
    main()
