"""Benchmark the compiled kernels against the numpy reference fallback.

Runs connected-component labeling and the MoG update over randomized inputs
with both backends and reports per-call timings plus speedup.

    python3 benchmarks/bench_kernels.py --repeats 20
"""

import argparse
import importlib
import time

import numpy as np

from cova.kernels import reference


def load_compiled():
    try:
        return importlib.import_module("cova.kernels._core")
    except ImportError:
        return None


def time_call(fn, args_factory, repeats):
    """Best-of-N wall time; fresh arguments each call so in-place updates
    don't let one backend warm-start the next."""
    best = float("inf")
    for _ in range(repeats):
        args = args_factory()
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_label_components(impl, rng_seed, shape, repeats):
    def make():
        rng = np.random.default_rng(rng_seed)
        return ((rng.random(shape) < 0.35).astype(np.uint8),)

    return time_call(impl.label_components, make, repeats)


def bench_mog_update(impl, rng_seed, shape, repeats):
    def make():
        rng = np.random.default_rng(rng_seed)
        h, w = shape
        k = 3
        x = rng.uniform(0, 255, size=(h, w))
        mean = rng.uniform(0, 255, size=(k, h, w))
        var = rng.uniform(20, 200, size=(k, h, w))
        weight = rng.dirichlet(np.ones(k), size=(h, w)).transpose(2, 0, 1).copy()
        return (x, mean, var, weight, 0.02, 6.25, 0.7, 225.0, 4.0, 0.05)

    return time_call(impl.mog_update, make, repeats)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=10,
                        help="timing repeats per kernel (best-of)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--grid", type=int, nargs=2, default=(192, 320),
                        metavar=("H", "W"), help="pixel grid for the MoG kernel")
    args = parser.parse_args()

    compiled = load_compiled()
    if compiled is None:
        print("compiled extension not available; reference timings only")

    mb_shape = (args.grid[0] // 16 * 4, args.grid[1] // 16 * 4)
    cases = [
        ("label_components %dx%d" % mb_shape,
         lambda impl: bench_label_components(impl, args.seed, mb_shape, args.repeats)),
        ("mog_update %dx%dx3" % tuple(args.grid),
         lambda impl: bench_mog_update(impl, args.seed, tuple(args.grid), args.repeats)),
    ]

    print(f"{'kernel':<28}{'reference':>12}{'compiled':>12}{'speedup':>10}")
    for name, runner in cases:
        t_ref = runner(reference)
        if compiled is not None:
            t_c = runner(compiled)
            print(f"{name:<28}{t_ref * 1e3:>10.2f}ms{t_c * 1e3:>10.2f}ms"
                  f"{t_ref / t_c:>9.1f}x")
        else:
            print(f"{name:<28}{t_ref * 1e3:>10.2f}ms{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
