"""Timing of the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--sizes 8 16 32 64] [--m 1024] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from vkrls.kernels import available_backends, run_stack_kernel
from vkrls.qrkr import recursive_qr_general


def _triangular(rng, l):
    return np.triu(rng.standard_normal((l, l)) + 1j * rng.standard_normal((l, l))) + 2 * np.eye(l)


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32, 64])
    parser.add_argument("--m", type=int, default=1024, help="snapshots for the end-to-end run")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the python backend is timed")
    rng = np.random.default_rng(0)
    print(f"{'case':<28}" + "".join(f"{b:>12}" for b in backends) + (f"{'speedup':>10}" if len(backends) > 1 else ""))
    for l in args.sizes:
        A, B = _triangular(rng, l), _triangular(rng, l)
        lam = rng.uniform(0.5, 1.2, l) * np.exp(2j * np.pi * rng.uniform(size=l))
        cases = [
            (f"givens l={l}", lambda b: run_stack_kernel("givens", A, B, backend=b)),
            (f"householder l={l}", lambda b: run_stack_kernel("householder", A, B, backend=b)),
            (f"recursive l={l} m={args.m}", lambda b: recursive_qr_general(A, lam, args.m, backend=b)),
        ]
        for name, fn in cases:
            times = [_best(lambda: fn(b), args.repeat) for b in backends]
            row = f"{name:<28}" + "".join(f"{t * 1e3:>10.3f}ms" for t in times)
            if len(times) > 1:
                row += f"{times[0] / times[1]:>9.1f}x"
            print(row)


if __name__ == "__main__":
    main()
