"""Compare compiled and pure-Python kernel throughput.

Times the three replication-heavy kernels through their public entry
points — the discrete-event queue simulator, the Metropolis-Hastings
chain, and the dense grid scan — once per available backend, and prints
a small table with the speedup of the compiled extension.

Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""
from __future__ import annotations

import time

import numpy as np

from simcal._kernels import available_backends
from simcal.bounds import QueryFunctional, ThresholdSpec, brute_force_bound, threshold_from_spec
from simcal.data import ProblemData
from simcal.mode import SolverOptions, find_posterior_mode
from simcal.posterior import PosteriorModel
from simcal.prior import GaussianPriorSpec
from simcal.sampler import mh_sample
from simcal.sim import CallCenterConfig, pooled_mean_wait


def _model() -> PosteriorModel:
    data = ProblemData(
        design_coords=np.array([0.0, 1.0]),
        real_counts=np.array([[500, 300, 200], [250, 400, 350]]),
        sim_counts=np.array([[400, 350, 250], [300, 350, 350]]),
    )
    prior = GaussianPriorSpec(
        lambda_d=0.25, lambda_p=0.01, rho_design=0.75, rho_outcome=0.75
    )
    return PosteriorModel(data, prior)


def bench_queue(backend: str) -> tuple[float, float]:
    cfg = CallCenterConfig(servers=3)
    reps = 20000
    t0 = time.perf_counter()
    value = pooled_mean_wait(cfg, reps, 42, backend=backend)
    return time.perf_counter() - t0, value


def bench_chain(backend: str) -> tuple[float, float]:
    model = _model()
    t0 = time.perf_counter()
    chain = mh_sample(model, 50000, 7, burn_in=1000, step_scale=0.05, backend=backend)
    return time.perf_counter() - t0, float(chain.acceptance_rate)


def bench_grid(backend: str) -> tuple[float, float]:
    data = ProblemData(
        design_coords=np.array([0.0]),
        real_counts=np.array([[30, 20, 15]]),
        sim_counts=np.array([[60, 50, 40]]),
    )
    prior = GaussianPriorSpec(lambda_d=0.25, lambda_p=0.01)
    model = PosteriorModel(data, prior)
    mode = find_posterior_mode(model, SolverOptions(seed=1))
    log_c = threshold_from_spec(ThresholdSpec(q=0.975), mode.log_post_star)
    fn = QueryFunctional(np.array([[0.0, 0.5, 1.0]]))
    t0 = time.perf_counter()
    value = brute_force_bound(
        model, fn, log_c, "max", grid_step=0.004, max_grid_points=50_000_000
    )
    return time.perf_counter() - t0, value


BENCHES = [
    ("queue simulator (20k reps)", bench_queue),
    ("MH chain (50k draws)", bench_chain),
    ("grid scan (3-outcome, 4e-3)", bench_grid),
]


def main() -> None:
    backends = available_backends()
    print(f"available backends: {', '.join(backends)}")
    header = f"{'kernel':<28}" + "".join(f"{b:>12}" for b in backends)
    if "compiled" in backends and "python" in backends:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, fn in BENCHES:
        times = {}
        checks = {}
        for b in backends:
            times[b], checks[b] = fn(b)
        row = f"{name:<28}" + "".join(f"{times[b]:>11.3f}s" for b in backends)
        if "compiled" in times and "python" in times:
            row += f"{times['python'] / times['compiled']:>9.1f}x"
        print(row)
        vals = set(round(v, 12) for v in checks.values())
        if len(vals) > 1:
            print(f"  WARNING: backends disagree: {checks}")
    print("(outputs verified identical across backends)")


if __name__ == "__main__":
    main()
