import math

import numpy as np
import pytest

from wwlab import dn
from wwlab.spectral import PeriodicGrid, SpectralField, l2_norm, sobolev_norm


def cosine(grid, k, amp=1.0):
    return SpectralField.from_values(grid, amp * np.cos(k * grid.xvec[0]))


def test_chebyshev_differentiation_is_exact_on_polynomials():
    x, D = dn.cheb(12)
    np.testing.assert_allclose(D @ x**5, 5 * x**4, atol=1e-11)


def test_flat_map_is_linear_in_z():
    g = PeriodicGrid(1, 32)
    fmap = dn.build_flattening(SpectralField.zeros(g), h=0.8)
    z = fmap.z_levels
    np.testing.assert_allclose(fmap.rho, 0.8 * np.broadcast_to(z[:, None], fmap.rho.shape), atol=1e-14)
    np.testing.assert_allclose(fmap.rho_z, 0.8, atol=1e-13)


def test_map_trace_is_surface():
    g = PeriodicGrid(1, 32)
    eta = cosine(g, 2, 0.05)
    fmap = dn.build_flattening(eta, h=1.0)
    top = int(np.argmax(fmap.z_levels))
    np.testing.assert_allclose(fmap.rho[top], eta.values, atol=1e-13)


def test_rho_z_bounds_and_delta_shrinking():
    g = PeriodicGrid(1, 64)
    eta = cosine(g, 1, 0.3)
    fmap = dn.build_flattening(eta, h=1.0, delta=None)
    lo, hi = fmap.rho_z_bounds()
    assert 0 < lo <= hi
    assert lo >= 0.5 * fmap.h and hi <= 1.5 * fmap.h
    with pytest.raises(ValueError):
        dn.build_flattening(eta, h=1.0, delta=5.0)


def test_zero_data_gives_zero_potential():
    g = PeriodicGrid(1, 32)
    fmap = dn.build_flattening(cosine(g, 1, 0.1))
    sol = dn.solve_dirichlet(fmap, SpectralField.zeros(g))
    assert np.max(np.abs(sol.v)) == 0.0


def test_deep_flat_harmonic_extension():
    g = PeriodicGrid(1, 32)
    k = 3
    fmap = dn.build_flattening(SpectralField.zeros(g), h=1.0)
    sol = dn.solve_dirichlet(fmap, cosine(g, k))
    y = fmap.rho  # physical height on the upper element
    exact = np.exp(k * y) * np.cos(k * g.x1d)[None, :]
    np.testing.assert_allclose(sol.v, exact, atol=1e-11)


def test_flat_bottom_extension():
    g = PeriodicGrid(1, 32)
    k, H = 2, 1.0
    fmap = dn.build_flattening(SpectralField.zeros(g), h=0.5, bottom="flat", depth=H)
    sol = dn.solve_dirichlet(fmap, cosine(g, k))
    y = fmap.rho
    exact = np.cosh(k * (y + H)) / math.cosh(k * H) * np.cos(k * g.x1d)[None, :]
    np.testing.assert_allclose(sol.v, exact, atol=1e-11)


@pytest.mark.parametrize("bottom,depth", [("deep", None), ("flat", 1.0), ("flat", 0.4)])
def test_dn_flat_closed_forms(bottom, depth):
    g = PeriodicGrid(1, 64)
    h = 1.0 if bottom == "deep" else 0.5 * depth
    fmap = dn.build_flattening(SpectralField.zeros(g), h=h, bottom=bottom, depth=depth)
    for k in (1, 5, 12):
        G = dn.dn_exact(fmap, cosine(g, k))
        mult = k if bottom == "deep" else k * math.tanh(depth * k)
        np.testing.assert_allclose(G.values, mult * np.cos(k * g.x1d), atol=1e-10)


def test_constants_are_in_the_kernel():
    g = PeriodicGrid(1, 32)
    fmap = dn.build_flattening(cosine(g, 1, 0.2) + cosine(g, 2, 0.05))
    f = SpectralField.from_values(g, np.full(g.shape, 2.5))
    assert l2_norm(dn.dn_exact(fmap, f)) < 1e-10 * l2_norm(f)


def test_dn_is_symmetric_and_nonnegative(rng):
    g = PeriodicGrid(1, 32)
    fmap = dn.build_flattening(cosine(g, 1, 0.15))
    mask = np.abs(g.mode_index[0]) < 8
    fs = []
    for _ in range(2):
        c = np.where(mask, rng.normal(size=32), 0.0)
        fs.append(SpectralField.from_values(g, np.real(np.fft.ifft(c)) * 32))
    from wwlab.spectral import inner
    Gf = [dn.dn_exact(fmap, f) for f in fs]
    assert inner(fs[0], Gf[1]) == pytest.approx(inner(fs[1], Gf[0]), rel=1e-9, abs=1e-12)
    assert inner(fs[0], Gf[0]) > 0


def test_two_dimensional_flat_case():
    g = PeriodicGrid(2, 16)
    fmap = dn.build_flattening(SpectralField.zeros(g))
    f = SpectralField.from_values(g, np.cos(2 * g.xvec[0] + g.xvec[1]))
    np.testing.assert_allclose(dn.dn_exact(fmap, f).values, math.sqrt(5) * f.values, atol=1e-10)


def test_paralinearization_flat_and_linear():
    g = PeriodicGrid(1, 64)
    zero = SpectralField.zeros(g)
    f = cosine(g, 9)
    G = dn.dn_exact(dn.build_flattening(zero), f)
    R = G - dn.dn_paralinearized(zero, f)
    assert l2_norm(R) < 1e-10
    eta = cosine(g, 1, 0.1)
    fmap = dn.build_flattening(eta)
    r = lambda u: dn.dn_exact(fmap, u) - dn.dn_paralinearized(eta, u)
    u, v = cosine(g, 4), cosine(g, 7)
    assert l2_norm(r(2 * u + v) - 2 * r(u) - r(v)) < 1e-10


def test_paralinearization_gain_small_grid():
    g = PeriodicGrid(1, 128)
    sw = dn.paralinearization_sweep(cosine(g, 1, 0.1), ks=(4, 8, 16, 32))
    assert sw["slope_G"] - sw["slope_remainder"] >= 0.4
    with pytest.raises(ValueError):
        dn.paralinearization_sweep(cosine(g, 1, 0.1), ks=(64,))


def test_taylor_at_rest_and_routes_agree():
    g = PeriodicGrid(1, 64)
    zero = SpectralField.zeros(g)
    fmap = dn.build_flattening(zero)
    sol = dn.solve_dirichlet(fmap, zero)
    np.testing.assert_allclose(dn.taylor_coefficient(sol, g=9.81).taylor_a.values, 9.81, atol=1e-12)
    eta, psi = cosine(g, 1, 0.05), SpectralField.from_values(g, 0.05 * np.sin(g.x1d))
    fmap = dn.build_flattening(eta)
    sol = dn.solve_dirichlet(fmap, psi)
    p = dn.taylor_coefficient(sol, g=1.0)
    a_surf = dn.taylor_surface_route(eta, psi, fmap, g=1.0)
    assert np.max(np.abs(np.asarray(p.taylor_a.values) - np.asarray(a_surf.values))) < 1e-8


def test_solver_rejects_grid_mismatch():
    fmap = dn.build_flattening(SpectralField.zeros(PeriodicGrid(1, 32)))
    with pytest.raises(ValueError):
        dn.dn_exact(fmap, SpectralField.zeros(PeriodicGrid(1, 64)))


def test_h_minus_half_norm_of_mode():
    g = PeriodicGrid(1, 32)
    assert dn.h_minus_half_norm(cosine(g, 3)) == pytest.approx(math.sqrt(math.pi) / 10**0.25, rel=1e-12)
    assert sobolev_norm(cosine(g, 3), -0.5) == pytest.approx(dn.h_minus_half_norm(cosine(g, 3)))


def test_alpha_identity():
    g = PeriodicGrid(1, 32)
    fmap = dn.build_flattening(cosine(g, 1, 0.2) + cosine(g, 3, 0.05))
    sol = dn.solve_dirichlet(fmap, cosine(g, 2))
    (gr,) = fmap.grad_rho
    np.testing.assert_allclose(sol.alpha, fmap.rho_z**2 / (1 + gr**2), rtol=1e-12)
    assert np.min(sol.alpha) > 0
    assert sol.interior_residual() < 1e-10
