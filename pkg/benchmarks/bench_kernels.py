"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from lockbench import kernels
from lockbench.nn import mlp_init


def cases(rng):
    # ERM counts on a GC-style slice: 1000 samples, 2n = 2 * 55 features
    Z = (rng.random((1000, 110)) < 0.3).astype(np.float64)
    y = rng.integers(0, 2, size=1000).astype(np.int64)
    yield "erm_error_counts 1000x110", lambda k: k.erm_error_counts(Z, y)

    params = mlp_init((21, 16, 2), rng)
    X = rng.random((500, 21))
    out = rng.integers(0, 2, size=500).astype(np.int64)
    t = rng.normal(size=500)
    sizes = np.asarray(params.sizes, dtype=np.int64)

    def sgd(k):
        flat = params.flat.copy()
        k.sgd_sequential(flat, sizes, X, out, t, 0.01)
    yield "sgd_sequential 500 samples, 21-16-2", sgd

    n = 280_000
    theta, g = rng.normal(size=n), rng.normal(size=n)
    m, v = np.zeros(n), np.zeros(n)
    yield "adamw_update 280k params", lambda k: k.adamw_update(theta, g, m, v, 1e-3, 1e-4, 0.9, 0.999, 1e-8, 3)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=20)
    args = ap.parse_args()
    found = kernels.backends()
    print(f"active backend: {kernels.BACKEND}; available: {', '.join(found)}")
    print(f"{'kernel':<38}" + "".join(f"{name:>12}" for name in found) + "     speedup")
    for label, fn in cases(np.random.default_rng(0)):
        times = {}
        for name, mod in found.items():
            best = min(timeit.repeat(lambda: fn(mod), number=args.number, repeat=args.repeat))
            times[name] = best / args.number
        cells = "".join(f"{times[name] * 1e3:>10.3f}ms" for name in found)
        speed = f"{times['python'] / times['cython']:>9.1f}x" if len(times) == 2 else ""
        print(f"{label:<38}{cells}{speed}")


if __name__ == "__main__":
    main()
