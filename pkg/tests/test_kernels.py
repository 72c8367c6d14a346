import os
import subprocess
import sys

import numpy as np
import pytest

from wwlab import _kernels as K


def _data(rng, n_pts=64, n_modes=24):
    c = rng.normal(size=n_modes) + 1j * rng.normal(size=n_modes)
    k = np.arange(n_modes, dtype=float) - n_modes // 2
    x = rng.uniform(0, 2 * np.pi, n_pts)
    return c, k, x


def test_trig_eval_matches_numpy(rng):
    c, k, x = _data(rng)
    np.testing.assert_allclose(K.trig_eval(c, k, x), K._trig_eval_numpy(c, k, x), atol=1e-12)


def test_trig_eval_nd_matches_numpy(rng):
    c = rng.normal(size=10) + 0j
    k = rng.integers(-4, 5, size=(10, 2)).astype(float)
    x = rng.uniform(0, 6, size=(30, 2))
    np.testing.assert_allclose(K.trig_eval_nd(c, k, x), K._trig_eval_nd_numpy(c, k, x), atol=1e-12)


def test_quantize_matches_numpy(rng):
    c, k, x = _data(rng)
    sym = rng.normal(size=(len(x), len(k))) + 1j * rng.normal(size=(len(x), len(k)))
    w = c.copy()
    w[::3] = 0.0  # exercises the zero-weight skip
    np.testing.assert_allclose(K.quantize(sym, w, k, x), K._quantize_numpy(sym, w, k, x), atol=1e-12)


def test_trig_eval_reproduces_grid_values():
    n = 32
    x = np.arange(n) * 2 * np.pi / n
    f = np.cos(3 * x) + 0.5 * np.sin(5 * x)
    c = np.fft.fft(f) / n
    k = np.fft.fftfreq(n, 1.0 / n)
    np.testing.assert_allclose(K.trig_eval(c, k, x).real, f, atol=1e-12)


def test_backend_name():
    assert K.backend() in {"numba", "numpy"}
    assert (K.backend() == "numba") == K.HAVE_NUMBA


def test_disable_flag_selects_numpy():
    env = dict(os.environ, WWLAB_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from wwlab import _kernels; print(_kernels.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


@pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba not installed")
def test_numba_backend_is_default_when_installed():
    env = {k: v for k, v in os.environ.items() if k != "WWLAB_DISABLE_NUMBA"}
    out = subprocess.run([sys.executable, "-c", "from wwlab import _kernels; print(_kernels.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"
