"""Timing comparison of the numba kernels against their numpy fallbacks.

Run: python benchmarks/bench_kernels.py [--trials N] [--rounds N]
The numba path needs numba importable and DACSIM_DISABLE_NUMBA unset.
"""

import argparse
import time

import numpy as np

from dacsim import kernels


def bench(label, fn, repeats=5):
    fn()  # warm-up (includes JIT compilation on the numba path)
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    best = min(times)
    print(f"{label:<34} {best * 1e3:9.2f} ms")
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--trials", type=int, default=1_000_000)
    parser.add_argument("--rounds", type=int, default=200_000)
    parser.add_argument("--nodes", type=int, default=8)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    n = args.nodes
    codes = np.array(
        [kernels.BRIBED] * (n // 2) + [kernels.PLACE_ONLY] * (n - n // 2 - 1) + [kernels.FREE_RIDER],
        dtype=np.int64,
    )
    probs = np.full(n, 0.7)
    uniforms = rng.random((args.trials, n))
    coin_u = rng.random(args.trials)
    net_u = rng.random((args.trials, n))
    con_u = rng.random((args.trials, n))
    round_u = rng.random(args.rounds)
    bribed = np.zeros(n, dtype=bool)
    bribed[: n // 2] = True
    byz = np.zeros(n, dtype=bool)
    byz[-1] = True

    paths = ["numpy"] + (["numba"] if kernels.USING_NUMBA else [])
    if not kernels.USING_NUMBA:
        print("numba path unavailable (disabled or not installed); numpy only\n")

    results = {}
    for path in paths:
        results[path] = {}
        results[path]["profile"] = bench(
            f"profile_trials[{path}] {args.trials:.0e}",
            lambda p=path: kernels.profile_trials(
                codes, probs, 0.3, kernels.CLIENT_ALWAYS, 2, uniforms, coin_u, force=p
            ),
        )
        results[path]["reward"] = bench(
            f"reward_trials[{path}]  {args.trials:.0e}",
            lambda p=path: kernels.reward_trials(0.2, 0.6, net_u, con_u, force=p),
        )
        results[path]["repeated"] = bench(
            f"repeated_rounds[{path}] {args.rounds:.0e}",
            lambda p=path: kernels.repeated_rounds(
                round_u, 0.25, bribed, byz, 2, 0.4, 0.1, 2.0, 0.11, 1.0, 0.0, force=p
            ),
        )

    if len(paths) == 2:
        print()
        for key in ("profile", "reward", "repeated"):
            speedup = results["numpy"][key] / results["numba"][key]
            print(f"{key:<12} numba speedup: {speedup:5.1f}x")


if __name__ == "__main__":
    main()
