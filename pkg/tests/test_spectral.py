import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wwlab.spectral import (
    DyadicDecomposition, PeriodicGrid, ResolutionWarning, SpectralField, abs_d, apply_multiplier, l2_norm,
    lp_block, lp_blocks, product, sobolev_norm, zygmund_norm,
)


def cosine(grid, k):
    return SpectralField.from_values(grid, np.cos(k * grid.xvec[0]))


def test_grid_validation():
    with pytest.raises(ValueError):
        PeriodicGrid(3, 32)
    with pytest.raises(ValueError):
        PeriodicGrid(1, 48)
    with pytest.raises(ValueError):
        PeriodicGrid(1, 32, period=-1.0)


def test_wavenumbers_are_integer_multiples():
    g = PeriodicGrid(1, 16, period=4.0)
    m = np.fft.fftfreq(16, 1 / 16)
    np.testing.assert_allclose(g.k1d, 2 * math.pi * m / 4.0)
    assert m.min() == -8 and m.max() == 7


def test_identity_multiplier():
    g = PeriodicGrid(1, 32)
    f = cosine(g, 3) + 0.3 * cosine(g, 5)
    np.testing.assert_allclose(apply_multiplier(f, np.ones(g.shape)).coeffs, f.coeffs)


def test_abs_d_eigenfunction():
    g = PeriodicGrid(1, 64)
    for k in (1, 4, 9):
        np.testing.assert_allclose(abs_d(cosine(g, k)).values, k * np.cos(k * g.xvec[0]), atol=1e-12)


def test_poisson_multiplier_matches_kernel_quadrature():
    g = PeriodicGrid(1, 64)
    k = 3
    out = apply_multiplier(cosine(g, k), np.exp(-g.kabs)).values
    # periodic Poisson kernel at depth 1: P(x) = (1/2pi) sinh(1) / (cosh(1) - cos x)
    x = g.x1d
    P = np.sinh(1.0) / (np.cosh(1.0) - np.cos(x)) / (2 * math.pi)
    conv = np.array([np.sum(P * np.cos(k * (xi - x))) * g.dx for xi in x])
    np.testing.assert_allclose(out, conv, atol=1e-10)
    np.testing.assert_allclose(out, math.exp(-k) * np.cos(k * x), atol=1e-12)


def test_lp_block_support():
    g = PeriodicGrid(1, 64)
    f = cosine(g, 8)
    for j in DyadicDecomposition(g).indices:
        norm = l2_norm(lp_block(f, j))
        if j >= 0 and 2 ** (j - 1) <= 8 <= 2 ** (j + 1):
            continue
        assert norm < 1e-14, j


def test_lp_partition_of_unity(rng):
    g = PeriodicGrid(1, 128)
    c = np.zeros(128, complex)
    c[1:40] = rng.normal(size=39)
    f = SpectralField.from_values(g, np.real(np.fft.ifft(c)) * 128)
    total = sum(lp_blocks(f).values(), SpectralField.zeros(g))
    assert l2_norm(total - f) < 1e-10 * l2_norm(f)


def test_lp_almost_orthogonality(rng):
    g = PeriodicGrid(2, 64)
    f = SpectralField.from_values(g, rng.normal(size=g.shape))
    s = sum(l2_norm(b) ** 2 for b in lp_blocks(f).values())
    assert 0.5 <= s / l2_norm(f) ** 2 <= 2.0


def test_block_beyond_resolution_warns():
    g = PeriodicGrid(1, 32)
    with pytest.warns(ResolutionWarning):
        out = lp_block(cosine(g, 1), 40)
    assert l2_norm(out) == 0.0
    with pytest.raises(ValueError):
        lp_block(cosine(g, 1), -2)


def test_sobolev_examples():
    g = PeriodicGrid(1, 64)
    assert sobolev_norm(SpectralField.zeros(g), 1.0) == 0.0
    k = 5
    f = cosine(g, k)
    assert sobolev_norm(f, 0.0) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    assert sobolev_norm(f, 1.0) / sobolev_norm(f, 0.0) == pytest.approx(math.sqrt(1 + k * k), rel=1e-12)


def test_zygmund_examples():
    g = PeriodicGrid(1, 256)
    assert zygmund_norm(SpectralField.zeros(g), 0.0) == 0.0
    assert zygmund_norm(cosine(g, 16), 0.0) == pytest.approx(1.0, abs=0.05)
    f = SpectralField.from_values(g, sum(2.0**-j * np.cos(2**j * g.x1d) for j in range(1, 7)))
    assert zygmund_norm(f, 1.0) == pytest.approx(1.0, abs=0.25)


def test_product_is_dealiased():
    g = PeriodicGrid(1, 32)
    p = product(cosine(g, 8), cosine(g, 8))
    assert np.all(p.coeffs[~g.dealias_mask] == 0)


def test_grid_mismatch_rejected():
    a = SpectralField.zeros(PeriodicGrid(1, 32))
    b = SpectralField.zeros(PeriodicGrid(1, 64))
    with pytest.raises(ValueError):
        a + b


coeff = st.floats(-1.0, 1.0, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(coeff, min_size=6, max_size=6), st.floats(-2.0, 2.0))
def test_sobolev_monotone_in_s(cs, s):
    g = PeriodicGrid(1, 32)
    f = SpectralField.from_values(g, sum(c * np.cos((i + 1) * g.x1d) for i, c in enumerate(cs)))
    assert sobolev_norm(f, s) <= sobolev_norm(f, s + 0.5) + 1e-14


@settings(max_examples=40, deadline=None)
@given(st.lists(coeff, min_size=4, max_size=4), st.floats(-3.0, 3.0))
def test_multiplier_linearity(cs, lam):
    g = PeriodicGrid(1, 32)
    f = SpectralField.from_values(g, sum(c * np.sin((i + 2) * g.x1d) for i, c in enumerate(cs)))
    m = g.kbracket
    lhs = apply_multiplier(lam * f, m)
    rhs = lam * apply_multiplier(f, m)
    np.testing.assert_allclose(lhs.coeffs, rhs.coeffs, atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.lists(coeff, min_size=5, max_size=5))
def test_real_fields_stay_hermitian(cs):
    g = PeriodicGrid(1, 32)
    f = SpectralField.from_values(g, sum(c * np.cos((i + 1) * g.x1d + i) for i, c in enumerate(cs)))
    assert f.hermitian_defect() < 1e-12
    assert abs_d(f).hermitian_defect() < 1e-12


def test_roundtrip_and_multiplier_composition(rng):
    g = PeriodicGrid(2, 32)
    v = rng.normal(size=g.shape)
    f = SpectralField.from_values(g, v)
    assert np.max(np.abs(f.values - v)) <= 1e-12 * np.max(np.abs(v))
    m1, m2 = g.kbracket, np.exp(-0.1 * g.kabs)
    np.testing.assert_allclose(apply_multiplier(apply_multiplier(f, m1), m2).coeffs,
                               apply_multiplier(f, m1 * m2).coeffs, atol=1e-12)


def test_dealiased_product_matches_convolution(rng):
    g = PeriodicGrid(1, 64)
    top = int(g.dealias_fraction * g.n / 2) // 2

    def poly():
        c = np.zeros(64, complex)
        c[1:top] = rng.normal(size=top - 1) + 1j * rng.normal(size=top - 1)
        c[-np.arange(1, top)] = np.conj(c[1:top])
        return SpectralField(g, c, True)

    a, b = poly(), poly()
    exact = np.zeros(64, complex)
    m = g.mode_index[0].astype(int)
    for i in range(64):
        for j in range(64):
            if a.coeffs[i] != 0 and b.coeffs[j] != 0:
                exact[(m[i] + m[j]) % 64] += a.coeffs[i] * b.coeffs[j]
    np.testing.assert_allclose(product(a, b).coeffs, exact, atol=1e-12)


def test_zygmund_sobolev_embedding(rng):
    g = PeriodicGrid(1, 128)
    ratios = []
    for _ in range(8):
        c = np.zeros(128, complex)
        c[1:40] = (rng.normal(size=39) + 1j * rng.normal(size=39)) * np.arange(1, 40) ** -1.5
        c[-np.arange(1, 40)] = np.conj(c[1:40])
        f = SpectralField(g, c, True)
        ratios.append(zygmund_norm(f, 0.5) / sobolev_norm(f, 0.5 + 0.5 + 0.01))
    assert max(ratios) < 2.0 and max(ratios) / min(ratios) < 5.0
