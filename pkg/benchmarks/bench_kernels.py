"""Planner rollout: numba kernel against the numpy fallback.

    python benchmarks/bench_kernels.py [--others 8] [--steps 24] [--repeat 2000]

Both paths get identical inputs; the script checks they agree before timing.
"""
import argparse
import time

import numpy as np

from vfsim import _kernels


def make_inputs(others, steps, dt=0.25, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(steps + 1) * dt
    x0 = rng.uniform(-50, 200, others)
    v = rng.uniform(10, 35, others)
    ox = x0[:, None] + v[:, None] * t
    ov = np.repeat(v[:, None], steps + 1, axis=1)
    olane = np.repeat(rng.integers(0, 3, others)[:, None], steps + 1, axis=1)
    olane2 = np.full_like(olane, -1)
    return (0.0, 30.0, 30.0, 2, 1, 2, 4, steps, dt, ox, olane, olane2, ov,
            2.0, 5.0, 2.0, 4.0)


def best_of(fn, args, repeat, rounds=5):
    best = float("inf")
    for _ in range(rounds):
        start = time.perf_counter()
        for _ in range(repeat):
            fn(*args)
        best = min(best, (time.perf_counter() - start) / repeat)
    return best * 1e6


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--others", type=int, default=8)
    p.add_argument("--steps", type=int, default=24)
    p.add_argument("--repeat", type=int, default=2000)
    args = p.parse_args()

    inputs = make_inputs(args.others, args.steps)
    ref = _kernels.rollout_numpy(*inputs)
    print(f"others={args.others} steps={args.steps} repeat={args.repeat}")
    print(f"numpy  {best_of(_kernels.rollout_numpy, inputs, args.repeat):9.2f} us/call")
    if _kernels.rollout_numba is None:
        print("numba  not installed")
        return
    got = _kernels.rollout_numba(*inputs)  # also triggers compilation
    for a, b in zip(ref, got):
        assert np.allclose(a, b, rtol=0, atol=1e-9), "paths disagree"
    print(f"numba  {best_of(_kernels.rollout_numba, inputs, args.repeat):9.2f} us/call")


if __name__ == "__main__":
    main()
