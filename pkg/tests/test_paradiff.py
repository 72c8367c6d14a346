import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wwlab.paradiff import (
    CutoffPair, SampledSymbol, bony_remainder, bony_smoothing_slope, commutator_constants, mode, paradiff_apply,
    paraproduct, seminorm_M, symbol_U, symbol_gamma, symbol_lambda, symbol_q, symbols_aA,
)
from wwlab.spectral import PeriodicGrid, SpectralField, abs_d, l2_norm, product


def cosine(grid, k):
    return SpectralField.from_values(grid, np.cos(k * grid.xvec[0]))


def abs_xi(grid):
    return SampledSymbol.from_multiplier(grid, lambda xi: np.linalg.norm(xi, axis=1), 1.0, "|xi|")


def test_cutoff_validation():
    with pytest.raises(ValueError):
        CutoffPair(0.3, 0.2)
    c = CutoffPair()
    assert c.chi(0.05, 1.0) == pytest.approx(1.0)
    assert c.chi(0.25, 1.0) == pytest.approx(0.0)


def test_constant_paraproduct_is_high_part():
    g = PeriodicGrid(1, 64)
    u = sum((cosine(g, k) for k in (1, 5, 12)), SpectralField.zeros(g))
    out = paraproduct(SpectralField.from_values(g, 3.0 * np.ones(g.shape)), u)
    hi = np.abs(g.mode_index[0]) >= 2
    np.testing.assert_allclose(out.coeffs[hi], 3.0 * u.coeffs[hi], atol=1e-13)


def test_paraproduct_support():
    g = PeriodicGrid(1, 128)
    out = paraproduct(cosine(g, 1), cosine(g, 32))
    m = np.abs(g.mode_index[0])
    assert np.max(np.abs(out.coeffs[(m < 31) | (m > 33)])) < 1e-14
    assert np.max(np.abs(out.coeffs[m == 31])) > 0.1


def test_bony_decomposition_identity(rng):
    g = PeriodicGrid(1, 64)
    a = SpectralField.from_values(g, rng.normal(size=64))
    u = SpectralField.from_values(g, rng.normal(size=64))
    total = paraproduct(a, u) + paraproduct(u, a) + bony_remainder(a, u)
    np.testing.assert_allclose(total.coeffs, product(a, u).coeffs, atol=1e-13)


def test_remainder_zero_symbol_and_low_content():
    g = PeriodicGrid(1, 64)
    u = cosine(g, 6)
    assert l2_norm(bony_remainder(SpectralField.zeros(g), u)) == 0.0
    r = bony_remainder(u, u)
    assert abs(r.coeffs[0]) > 0.1  # the mean of cos^2 is not captured by either paraproduct


def test_bony_smoothing_regression():
    slope, _ = bony_smoothing_slope(n=256, ks=(8, 16, 32, 64))
    assert slope <= 0.1


def test_x_independent_symbol_acts_as_multiplier():
    g = PeriodicGrid(1, 128)
    for k in (4, 20):
        out = paradiff_apply(abs_xi(g), cosine(g, k))
        np.testing.assert_allclose(out.values, k * np.cos(k * g.x1d), atol=1e-12)


def test_lambda_flat_surface_matches_abs_d():
    g = PeriodicGrid(2, 32)
    lam = symbol_lambda(SpectralField.zeros(g))
    np.testing.assert_allclose(np.abs(lam.values), np.broadcast_to(np.linalg.norm(lam.freq_set, axis=1), lam.values.shape), atol=1e-14)
    u = SpectralField.from_values(g, np.cos(3 * g.xvec[0] + 2 * g.xvec[1]))
    np.testing.assert_allclose(paradiff_apply(lam, u).coeffs, abs_d(u).coeffs, atol=1e-12)


def test_lambda_is_abs_xi_in_one_dimension():
    g = PeriodicGrid(1, 64)
    eta = SpectralField.from_values(g, 0.3 * np.cos(g.x1d) + 0.1 * np.sin(3 * g.x1d))
    lam = symbol_lambda(eta)
    np.testing.assert_allclose(np.real(lam.values), np.broadcast_to(np.abs(lam.freq_set[:, 0]), lam.values.shape), atol=1e-13)


def test_lambda_two_dimensional_formula():
    g = PeriodicGrid(2, 32)
    eta = SpectralField.from_values(g, 0.1 * np.sin(g.xvec[0]))
    lam = symbol_lambda(eta)
    j = int(np.argmin(np.linalg.norm(lam.freq_set - np.array([0.0, 1.0]), axis=1)))
    expected = np.sqrt(1 + 0.01 * np.cos(g.xvec[0]) ** 2).ravel()
    np.testing.assert_allclose(np.real(lam.values[:, j]), expected, atol=1e-12)


def test_composition_with_inverse():
    g = PeriodicGrid(1, 256)
    eta = SpectralField.from_values(g, 0.1 * np.cos(g.x1d))
    lam = symbol_lambda(eta)
    inv = SampledSymbol.from_multiplier(g, lambda xi: 1.0 / np.maximum(np.abs(xi[:, 0]), 1e-300), -1.0)
    for k in (8, 32):
        u = mode(g, k)
        err = l2_norm(paradiff_apply(lam, paradiff_apply(inv, u)) - u) / l2_norm(u)
        assert err < 1e-12


def test_seminorm_examples():
    g = PeriodicGrid(1, 64)
    zero = SampledSymbol.from_multiplier(g, lambda xi: 0.0 * xi[:, 0], 1.0)
    assert seminorm_M(zero, 1.0, 0.0) == 0.0
    p = abs_xi(g)
    val = seminorm_M(p, 1.0, 0.0)
    assert 1.0 <= val <= 4.0
    three = SampledSymbol.from_multiplier(g, lambda xi: 3 * np.abs(xi[:, 0]), 1.0)
    assert seminorm_M(three, 1.0, 0.0) == pytest.approx(3 * val, rel=1e-10)


def test_aA_flat_limit():
    g = PeriodicGrid(1, 32)
    h = 0.7
    a, A = symbols_aA(h * h, (0.0,), grid=g)
    xi = np.abs(a.freq_set[:, 0])[None, :]
    np.testing.assert_allclose(a.values, np.broadcast_to(-h * xi, a.values.shape), atol=1e-13)
    np.testing.assert_allclose(A.values, np.broadcast_to(h * xi, A.values.shape), atol=1e-13)


def test_aA_identities(rng):
    g = PeriodicGrid(1, 32)
    alpha = SpectralField.from_values(g, 1.0 + 0.2 * np.cos(g.x1d))
    beta = SpectralField.from_values(g, 0.3 * np.sin(2 * g.x1d))
    a, A = symbols_aA(alpha, (beta,))
    xi = a.freq_set[:, 0][None, :]
    al = np.asarray(alpha.values)[:, None]
    be = np.asarray(beta.values)[:, None]
    np.testing.assert_allclose(a.values + A.values, -1j * be * xi, atol=1e-12)
    np.testing.assert_allclose(a.values * A.values, -al * xi**2, atol=1e-11)
    assert np.all(np.real(A.values) >= -1e-14)


def test_aA_rejects_non_elliptic():
    g = PeriodicGrid(1, 32)
    with pytest.raises(ValueError):
        symbols_aA(0.1, (1.0,), grid=g)


def test_gamma_and_q_at_rest():
    g = PeriodicGrid(1, 32)
    grav = 2.0
    a = SpectralField.from_values(g, grav * np.ones(g.shape))
    lam = symbol_lambda(SpectralField.zeros(g))
    xi = np.abs(lam.freq_set[:, 0])[None, :]
    gam = np.real(symbol_gamma(a, lam).values)
    np.testing.assert_allclose(gam, np.broadcast_to(np.sqrt(grav * xi), gam.shape), atol=1e-13)
    nz = xi[0] > 0
    q = np.real(symbol_q(a, lam).values)[:, nz]
    np.testing.assert_allclose(q, np.broadcast_to(np.sqrt(grav / xi[:, nz]), q.shape), atol=1e-13)


def test_gamma_identities():
    g = PeriodicGrid(2, 16)
    eta = SpectralField.from_values(g, 0.2 * np.cos(g.xvec[0]) * np.sin(g.xvec[1]))
    a = SpectralField.from_values(g, 1.0 + 0.1 * np.cos(g.xvec[1]))
    lam = symbol_lambda(eta)
    gam = np.real(symbol_gamma(a, lam).values)
    U = np.real(symbol_U(eta).values)
    av = np.asarray(a.values).ravel()[:, None]
    np.testing.assert_allclose(gam**4, av**2 * U, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(np.real(symbol_gamma(4 * a, lam).values), 2 * gam, atol=1e-12)


def test_taylor_sign_violation_rejected():
    g = PeriodicGrid(1, 16)
    with pytest.raises(ValueError):
        symbol_gamma(SpectralField.from_values(g, np.cos(g.x1d)), symbol_lambda(SpectralField.zeros(g)))


def test_commutator_constants_bounded():
    c = commutator_constants(n=128, samples=4)
    assert np.all(np.isfinite(c)) and np.max(c) < 10.0


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.integers(2, 20))
def test_paradiff_is_linear(s1, s2, k):
    g = PeriodicGrid(1, 64)
    eta = SpectralField.from_values(g, 0.1 * np.cos(g.x1d))
    a, A = symbols_aA(SpectralField.from_values(g, 1 + 0.1 * np.cos(g.x1d)),
                      (SpectralField.from_values(g, 0.1 * np.sin(g.x1d)),))
    u, v = cosine(g, k), cosine(g, 3)
    lhs = paradiff_apply(A, s1 * u + s2 * v)
    rhs = s1 * paradiff_apply(A, u) + s2 * paradiff_apply(A, v)
    np.testing.assert_allclose(lhs.coeffs, rhs.coeffs, atol=1e-12)
    del eta


def test_bony_identity_sup_norm(rng):
    from wwlab.spectral import linf_norm

    g = PeriodicGrid(1, 64)
    a = SpectralField.from_values(g, np.cos(g.x1d) + 0.3 * np.sin(5 * g.x1d))
    u = SpectralField.from_values(g, rng.normal(size=64)).dealiased()
    gap = product(a, u) - paraproduct(a, u) - paraproduct(u, a) - bony_remainder(a, u)
    assert linf_norm(gap) <= 1e-10 * linf_norm(a) * linf_norm(u)


def test_gamma_bounded_below_on_band():
    g = PeriodicGrid(1, 64)
    eta = SpectralField.from_values(g, 0.2 * np.cos(g.x1d))
    a = SpectralField.from_values(g, 0.5 + 0.2 * np.cos(2 * g.x1d))
    gam = symbol_gamma(a, symbol_lambda(eta))
    band = (np.abs(gam.freq_set[:, 0]) >= 0.5) & (np.abs(gam.freq_set[:, 0]) <= 2)
    assert np.min(np.real(gam.values[:, band])) >= np.sqrt(0.3 * 0.5) - 1e-12
