"""Compare the compiled and pure-NumPy kernels.

Run with ``python benchmarks/bench_kernels.py`` after building the
extension. Sizes mirror a Monte Carlo block (250 replicates of n = 200 draws
over d = 2000 bins, five statistics) and a diagnostics call at d = 2000.
"""
import argparse
import timeit

import numpy as np

from ustatgof import kernels
from ustatgof.distributions import power_law, sample_count_matrix


def bench(fn, args, repeat):
    times = timeit.repeat(lambda: fn(*args), number=1, repeat=repeat)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--d", type=int, default=2000)
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--reps", type=int, default=250)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    pi = power_law(args.d, 1)
    counts = sample_count_matrix(pi, args.n, 0, 0, 0, args.reps)
    coefs = np.ascontiguousarray(np.random.default_rng(0).uniform(0.5, 2.0, size=(10, args.d)))
    p = np.ascontiguousarray(pi.values)
    a = np.ascontiguousarray(1.0 / p)

    cases = [("count_sums", (counts, coefs)), ("kernel_moments", (p, p, a))]
    backends = [("python", kernels.fallback)]
    if kernels.compiled is not None:
        backends.append(("compiled", kernels.compiled))
    else:
        print("compiled extension not built; timing the fallback only")

    print(f"{'kernel':<16}{'backend':<10}{'best (s)':>12}{'speedup':>10}")
    for name, fargs in cases:
        base = None
        for label, mod in backends:
            t = bench(getattr(mod, name), fargs, args.repeat)
            base = base or t
            print(f"{name:<16}{label:<10}{t:>12.5f}{base / t:>10.1f}x")


if __name__ == "__main__":
    main()
