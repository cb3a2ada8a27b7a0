"""Time the compiled kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeats N]

Runs value iteration and the reward-reconstruction LP on bundled maps with
each available backend and prints the best wall time of N runs.
"""

import argparse
import time

import numpy as np

from pril.gridworld import build_mdp, bundled_map
from pril.irl import IrlConfig, reconstruct_reward
from pril.kernels import available_backends
from pril.planning import value_iteration
from pril.privacy import NoiseSpec


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)

    backends = available_backends()
    cases = []
    for m in ("5x5_01", "10x10_01"):
        mdp = build_mdp(bundled_map(m))
        policy = value_iteration(mdp).policy
        cases.append((f"vi converge {m}",
                      lambda mdp=mdp, b=None: value_iteration(mdp, backend=b)))
        cases.append((f"vi 10000 noisy sweeps {m}",
                      lambda mdp=mdp, b=None: value_iteration(mdp, max_iters=10000, noise=NoiseSpec(1.0),
                                                             rng=np.random.default_rng(0), backend=b)))
        cases.append((f"irl lp {m}",
                      lambda mdp=mdp, policy=policy, b=None: reconstruct_reward(
                          mdp.P, policy, IrlConfig(), terminal=mdp.terminal, backend=b)))

    names = sorted(backends)
    print(f"{'case':32s}" + "".join(f"{n:>12s}" for n in names) + "   speedup")
    for label, fn in cases:
        times = {n: best_of(lambda: fn(b=backends[n]), args.repeats) for n in names}
        speedup = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{label:32s}" + "".join(f"{times[n] * 1e3:10.2f}ms" for n in names) + f"   {speedup:6.1f}x")


if __name__ == "__main__":
    main()
