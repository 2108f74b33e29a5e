"""Time the compiled and pure-Python ADMM kernels on the same instances.

Run with ``python3 benchmarks/bench_kernels.py [--repeat R]``.  Both backends
see identical inputs; the script reports the median wall time per solve, the
speed-up, and the largest difference between the two solutions.
"""

import argparse
import statistics
import time

import numpy as np

from compobs import kernels
from compobs.experiments import ExperimentConfig, initial_state, make_ensemble
from compobs.measure import observability
from compobs.recovery import solve_bp, solve_bpdn


def instances(count, M, omega, noise):
    cfg = ExperimentConfig(M_list=[M], omega_sets=[omega], noise_std=noise)
    model = cfg.model()
    rng = np.random.default_rng(0)
    for i in range(count):
        x0 = initial_state(cfg, 1000 + i)
        Phi = observability(model, omega, make_ensemble(cfg, "dense", M, omega, 2000 + i)).materialize()
        y = Phi @ x0 + noise * rng.standard_normal(Phi.shape[0])
        yield Phi, y, noise * np.sqrt(Phi.shape[0])


def bench(solver, cases, backend, repeat):
    times, sols = [], []
    for Phi, y, eta in cases:
        best = np.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            res = solver(Phi, y, eta, backend)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
        sols.append(res.x_hat)
    return statistics.median(times), sols


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--instances", type=int, default=10)
    args = ap.parse_args(argv)
    if "cython" not in kernels.BACKENDS:
        print("compiled extension not available; only the Python kernels are installed")
    workloads = {
        "bp   M=30 k=2": (lambda P, y, e, b: solve_bp(P, y, backend=b), 30, [2], 0.0),
        "bpdn M=32 k=2": (lambda P, y, e, b: solve_bpdn(P, e, y, backend=b), 32, [2], 0.05),
    }
    print(f"{'workload':<16}{'python ms':>12}{'cython ms':>12}{'speed-up':>10}{'max |dx|':>12}")
    for name, (solver, M, omega, noise) in workloads.items():
        cases = list(instances(args.instances, M, omega, noise))
        t_py, x_py = bench(solver, cases, "python", args.repeat)
        if "cython" in kernels.BACKENDS:
            t_cy, x_cy = bench(solver, cases, "cython", args.repeat)
            diff = max(float(np.max(np.abs(a - b))) for a, b in zip(x_py, x_cy))
            print(f"{name:<16}{1e3 * t_py:>12.2f}{1e3 * t_cy:>12.2f}{t_py / t_cy:>10.2f}{diff:>12.2e}")
        else:
            print(f"{name:<16}{1e3 * t_py:>12.2f}{'-':>12}{'-':>10}{'-':>12}")


if __name__ == "__main__":
    main()
