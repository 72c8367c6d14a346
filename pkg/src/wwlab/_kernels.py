"""Hot inner loops, compiled with numba when available.

Set ``WWLAB_DISABLE_NUMBA=1`` to force the pure-numpy fallbacks. Both paths
return identical results to rounding; ``benchmarks/bench_kernels.py`` times
them against each other.
"""
import os

import numpy as np

_DISABLED = os.environ.get("WWLAB_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def _trig_eval_numpy(coeffs, k, x):
    phase = np.exp(1j * np.multiply.outer(x, k))
    return phase @ coeffs


def _trig_eval_nd_numpy(coeffs, k, x):
    return np.exp(1j * (x @ k.T)) @ coeffs


def _quantize_numpy(symbol, weights, k, x):
    phase = np.exp(1j * np.multiply.outer(x, k))
    return np.sum(symbol * phase * weights[None, :], axis=1)


if HAVE_NUMBA:

    @njit(cache=True, fastmath=False)
    def _trig_eval_numba(coeffs, k, x):
        n_pts = x.shape[0]
        n_modes = k.shape[0]
        out = np.empty(n_pts, dtype=np.complex128)
        for p in range(n_pts):
            acc = 0.0 + 0.0j
            xp = x[p]
            for m in range(n_modes):
                arg = k[m] * xp
                acc += coeffs[m] * (np.cos(arg) + 1j * np.sin(arg))
            out[p] = acc
        return out

    @njit(cache=True, fastmath=False)
    def _trig_eval_nd_numba(coeffs, k, x):
        n_pts, dim = x.shape
        n_modes = k.shape[0]
        out = np.empty(n_pts, dtype=np.complex128)
        for p in range(n_pts):
            acc = 0.0 + 0.0j
            for m in range(n_modes):
                arg = 0.0
                for a in range(dim):
                    arg += k[m, a] * x[p, a]
                acc += coeffs[m] * (np.cos(arg) + 1j * np.sin(arg))
            out[p] = acc
        return out

    @njit(cache=True, fastmath=False)
    def _quantize_numba(symbol, weights, k, x):
        n_pts = x.shape[0]
        n_modes = k.shape[0]
        out = np.empty(n_pts, dtype=np.complex128)
        for p in range(n_pts):
            acc = 0.0 + 0.0j
            xp = x[p]
            for m in range(n_modes):
                w = weights[m]
                if w == 0.0:
                    continue
                arg = k[m] * xp
                acc += symbol[p, m] * w * (np.cos(arg) + 1j * np.sin(arg))
            out[p] = acc
        return out


def trig_eval(coeffs, k, x):
    """Evaluate ``sum_m coeffs[m] exp(i k[m] x)`` at scattered points ``x``."""
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    k = np.ascontiguousarray(k, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if HAVE_NUMBA:
        return _trig_eval_numba(coeffs, k, x)
    return _trig_eval_numpy(coeffs, k, x)


def trig_eval_nd(coeffs, k, x):
    """Evaluate ``sum_m coeffs[m] exp(i k[m] . x)``; ``k`` is (modes, d), ``x`` is (points, d)."""
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    k = np.ascontiguousarray(k, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if HAVE_NUMBA:
        return _trig_eval_nd_numba(coeffs, k, x)
    return _trig_eval_nd_numpy(coeffs, k, x)


def quantize(symbol, weights, k, x):
    """Evaluate ``sum_m symbol[p, m] weights[m] exp(i k[m] x[p])`` for every ``p``.

    This is the left (Kohn-Nirenberg) quantization of a tabulated symbol
    acting on Fourier coefficients ``weights``.
    """
    symbol = np.ascontiguousarray(symbol, dtype=np.complex128)
    weights = np.ascontiguousarray(weights, dtype=np.complex128)
    k = np.ascontiguousarray(k, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if HAVE_NUMBA:
        return _quantize_numba(symbol, weights, k, x)
    return _quantize_numpy(symbol, weights, k, x)


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
