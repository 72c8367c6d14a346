"""Time the compiled kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both paths are called directly, so the WWLAB_DISABLE_NUMBA flag is irrelevant
here; without numba only the numpy column is printed.
"""
import argparse
import timeit

import numpy as np

from wwlab import _kernels as K


def cases(rng):
    n_pts, n_modes = 2048, 256
    coeffs = rng.normal(size=n_modes) + 1j * rng.normal(size=n_modes)
    k = np.arange(n_modes, dtype=float) - n_modes // 2
    x = rng.uniform(0, 2 * np.pi, n_pts)
    k2 = rng.integers(-16, 16, size=(n_modes, 2)).astype(float)
    x2 = rng.uniform(0, 2 * np.pi, size=(n_pts, 2))
    sym = rng.normal(size=(512, n_modes)) + 0j
    yield "trig_eval", (coeffs, k, x), "_trig_eval"
    yield "trig_eval_nd", (coeffs, k2, x2), "_trig_eval_nd"
    yield "quantize", (sym, coeffs, k, x[:512]), "_quantize"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<14}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}{'max diff':>11}")
    for name, argv, stem in cases(rng):
        ref = getattr(K, stem + "_numpy")(*argv)
        t_np = min(timeit.repeat(lambda: getattr(K, stem + "_numpy")(*argv), number=1, repeat=args.repeat))
        if K.HAVE_NUMBA:
            fast = getattr(K, stem + "_numba")
            out = fast(*argv)  # compile outside the timed region
            t_nb = min(timeit.repeat(lambda: fast(*argv), number=1, repeat=args.repeat))
            diff = float(np.max(np.abs(out - ref)))
            print(f"{name:<14}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>9.1f}{diff:>11.1e}")
        else:
            print(f"{name:<14}{1e3 * t_np:>12.2f}{'n/a':>12}{'':>9}{'':>11}")


if __name__ == "__main__":
    main()
