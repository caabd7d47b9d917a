"""Compare the compiled and numpy kernel backends on batched SINR evaluation.

Usage: python benchmarks/bench_kernels.py [--repeat 5] [--batch 4096]
"""
import argparse
import timeit

import numpy as np

from arisee import _kernels_py, model

try:
    from arisee import _kernels as compiled
except ImportError:
    compiled = None

# (K, N*I, M): desk profile, oracle instance, full-size preset
SHAPES = [(4, 8, 4), (1, 3, 4), (12, 40, 15)]


def inputs(batch, k, e, m, seed=0):
    rng = np.random.default_rng(seed)
    direct = model.complex_normal(rng, (k, m))
    cascade = model.complex_normal(rng, (e, k, m))
    coeffs = np.exp(2j * np.pi * rng.integers(0, 4, (batch, e)) / 4) * rng.integers(0, 2, (batch, e))
    g = model.complex_normal(rng, (1, k, m))
    return direct, cascade, coeffs, g, 1e-3


def best_time(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--batch", type=int, default=4096)
    args = ap.parse_args()
    if compiled is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
    print(f"{'K':>3} {'E':>4} {'M':>3} {'batch':>6} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for k, e, m in SHAPES:
        data = inputs(args.batch, k, e, m)
        t_py = best_time(_kernels_py.batch_sinr, data, args.repeat)
        if compiled is None:
            print(f"{k:>3} {e:>4} {m:>3} {args.batch:>6} {1e3 * t_py:>10.2f} {'-':>10} {'-':>8}")
            continue
        assert np.allclose(compiled.batch_sinr(*data), _kernels_py.batch_sinr(*data), rtol=1e-10)
        t_cy = best_time(compiled.batch_sinr, data, args.repeat)
        print(f"{k:>3} {e:>4} {m:>3} {args.batch:>6} {1e3 * t_py:>10.2f} {1e3 * t_cy:>10.2f} "
              f"{t_py / t_cy:>7.2f}x")


if __name__ == "__main__":
    main()
