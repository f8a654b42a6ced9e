"""Compiled vs. pure-numpy hot loops.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``.  Prints the
best-of-N wall time of each backend, the speed-up and the largest
difference between the two results.
"""
import argparse
import timeit

import numpy as np

from nilquant import _kernels_py

try:
    from nilquant import _kernels as compiled
except ImportError:
    compiled = None


def cases(rng):
    n = 64
    axis = np.linspace(-6, 6, n, endpoint=False)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    B = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    yield "twisted dense 64x64", "twisted_convolution", (A, B, axis, axis, 1.3, 0.035, 0.0)
    # localized Gaussians: most entries fall under the skip threshold
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    G = np.exp(-np.pi * ((X - 0.3) ** 2 + Y**2) / 0.25).astype(complex)
    H = np.exp(-np.pi * (X**2 + Y**2) / 0.5).astype(complex)
    yield "twisted localized 64x64", "twisted_convolution", (G, H, axis, axis, 1.3, 0.035, 1e-30)
    for m in (256, 1024):
        W = rng.normal(size=(2 * m - 1, m)) + 1j * rng.normal(size=(2 * m - 1, m))
        f = rng.normal(size=m) + 1j * rng.normal(size=m)
        yield f"weyl_apply n={m}", "weyl_apply", (W, f, 0.01)


def best_time(func, args, repeat):
    return min(timeit.repeat(lambda: func(*args), number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; run 'pip install -e . --no-build-isolation' first")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'case':<28} {'cython [ms]':>12} {'python [ms]':>12} {'speed-up':>9} {'max diff':>10}")
    for label, name, call in cases(rng):
        fast, slow = getattr(compiled, name), getattr(_kernels_py, name)
        t_fast = best_time(fast, call, args.repeat)
        t_slow = best_time(slow, call, args.repeat)
        diff = np.abs(np.asarray(fast(*call)) - slow(*call)).max()
        print(f"{label:<28} {1e3 * t_fast:>12.2f} {1e3 * t_slow:>12.2f} {t_slow / t_fast:>8.1f}x {diff:>10.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
