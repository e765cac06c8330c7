"""Time the compiled recurrence kernels against the pure-Python fallback.

    python3 benchmarks/bench_scan.py [--n 100000] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from crossover import _scan_py

try:
    from crossover import _scan as _compiled
except ImportError:
    _compiled = None


def bench(mod, n, repeat):
    rng = np.random.default_rng(0)
    a = rng.uniform(0.5, 1.0, n)
    b = rng.normal(size=n)
    cases = {
        "forward_scan": lambda: mod.forward_scan(a, b, 0.0),
        "backward_scan": lambda: mod.backward_scan(a, b, 0.0),
        "logistic_orbit": lambda: mod.logistic_orbit(1.07, 2.0, 1e-3, n),
    }
    return {k: min(timeit.repeat(f, number=1, repeat=repeat)) for k, f in cases.items()}


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    py = bench(_scan_py, args.n, args.repeat)
    cy = bench(_compiled, args.n, args.repeat) if _compiled else None
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':<16}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for k, t in py.items():
        if cy:
            print(f"{k:<16}{1e3 * t:>14.3f}{1e3 * cy[k]:>14.3f}{t / cy[k]:>10.1f}")
        else:
            print(f"{k:<16}{1e3 * t:>14.3f}{'n/a':>14}{'n/a':>10}")
    if not cy:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")


if __name__ == "__main__":
    main()
