import math

import numpy as np
import pytest

from wwlab import dynamics as W
from wwlab.fitting import loglog_slope
from wwlab.spectral import PeriodicGrid, SpectralField, bracket_power, l2_norm


def field(grid, fn):
    return SpectralField.from_values(grid, fn(grid.xvec[0]))


def state(grid, eta=None, psi=None, **kw):
    z = SpectralField.zeros(grid)
    return W.SurfaceState(0.0, eta or z, psi or z, **kw)


G32 = PeriodicGrid(1, 32)


def test_depth_config_parsing():
    assert W.DepthConfig.parse("deep") == W.DepthConfig()
    d = W.DepthConfig.parse("flat(2.5)")
    assert d.kind == "flat" and d.H == 2.5 and str(d) == "flat(2.5)"
    with pytest.raises(ValueError):
        W.DepthConfig.parse("shallow")
    with pytest.raises(ValueError):
        W.DepthConfig("flat", None)


def test_rest_state_is_stationary():
    st = W.SurfaceState.rest(G32)
    deta, dpsi = W.rhs(st)
    assert l2_norm(deta) == 0 and l2_norm(dpsi) == 0
    nxt = W.step_rk4(st, 0.05)
    assert l2_norm(nxt.eta) == 0 and l2_norm(nxt.psi) == 0
    assert W.energy(st) == 0.0


def test_linearized_rhs():
    eps, k = 1e-4, 3
    st = state(G32, eta=field(G32, lambda x: eps * np.cos(k * x)))
    deta, dpsi = W.rhs(st)
    assert l2_norm(deta) < 1e-12
    np.testing.assert_allclose(dpsi.values, -eps * np.cos(k * G32.x1d), atol=10 * eps**2)


def test_flat_surface_energy_closed_form():
    k = 3
    st = state(G32, psi=field(G32, lambda x: np.cos(k * x)))
    assert W.energy(st) == pytest.approx(0.5 * k * math.pi, rel=1e-10)


def test_energy_drift_small_amplitude():
    st = state(G32, eta=field(G32, lambda x: 1e-3 * np.cos(2 * x)))
    traj = W.simulate(st, 2.0, dt_max=0.02)
    assert len(traj.rows) == 101
    assert max(abs(r["drift"]) for r in traj.rows) <= 1e-8


def test_rk4_phase_error_is_fourth_order():
    k, eps = 2, 1e-5
    st = state(G32, eta=field(G32, lambda x: eps * np.cos(k * x)))
    ref = W.evolve(st, 1.0, dt_max=1 / 128)
    dts = [1 / 8, 1 / 12, 1 / 16]
    errs = [l2_norm(W.evolve(st, 1.0, dt_max=dt).eta - ref.eta) for dt in dts]
    assert loglog_slope(dts, errs) == pytest.approx(4.0, abs=0.2)


def test_cfl_enforced():
    st = W.SurfaceState.rest(G32)
    with pytest.raises(ValueError):
        W.step_rk4(st, 2 * W.cfl_limit(G32, 1.0))


def test_trace_velocities_rest_and_flat():
    tv = W.trace_velocities(W.SurfaceState.rest(G32, g=2.0))
    assert l2_norm(tv.B) == 0 and l2_norm(tv.V[0]) == 0
    np.testing.assert_allclose(tv.a_taylor.values, 2.0, atol=1e-12)
    k = 4
    st = state(G32, psi=field(G32, lambda x: np.cos(k * x)))
    tv = W.trace_velocities(st, taylor=False)
    np.testing.assert_allclose(tv.B.values, k * np.cos(k * G32.x1d), atol=1e-10)
    np.testing.assert_allclose(tv.V[0].values, -k * np.sin(k * G32.x1d), atol=1e-10)


def test_trace_reconstruction():
    st = state(G32, eta=field(G32, lambda x: 0.1 * np.cos(x)), psi=field(G32, lambda x: 0.1 * np.sin(2 * x)))
    tv = W.trace_velocities(st, taylor=False)
    assert tv.reconstruction_defect(st) < 1e-10


def test_gb_identity_flat_and_trivial():
    st = state(G32, psi=field(G32, lambda x: np.cos(3 * x)))
    assert W.gb_identity_residual(st) <= 1e-6
    assert W.gb_identity_residual(state(G32, eta=field(G32, lambda x: 0.1 * np.cos(x)))) < 1e-12
    with pytest.raises(ValueError):
        W.gb_identity_residual(state(G32, depth=W.DepthConfig("flat", 1.0)))


def test_good_unknowns_examples():
    gu = W.good_unknowns(W.SurfaceState.rest(G32))
    assert l2_norm(gu.U[0]) == 0 and l2_norm(gu.theta) == 0 and l2_norm(gu.u) == 0
    st = state(G32, psi=field(G32, lambda x: 0.1 * np.sin(2 * x)))
    gu = W.good_unknowns(st, s=1.5)
    np.testing.assert_allclose(gu.U[0].coeffs, bracket_power(gu.V[0], 1.5).coeffs, atol=1e-13)
    st = state(G32, eta=field(G32, lambda x: 0.05 * np.cos(x)), psi=field(G32, lambda x: 0.05 * np.sin(x)))
    assert W.good_unknowns(st).reassembly_defect() < 1e-10


def test_reduction_residual_rest_and_sampling_checks():
    rest = [W.SurfaceState.rest(G32).with_fields(t, SpectralField.zeros(G32), SpectralField.zeros(G32))
            for t in (0.0, 0.01, 0.02)]
    _, f, u = W.reduction_residual(rest)
    assert np.all(f == 0) and np.all(u == 0)
    with pytest.raises(ValueError):
        W.reduction_residual(rest[:2])
    coarse = [s.with_fields(20 * s.t, s.eta, s.psi) for s in rest]
    with pytest.raises(ValueError):
        W.reduction_residual(coarse)


def test_taylor_monitor_halts():
    st = state(G32, eta=field(G32, lambda x: 0.01 * np.cos(x)))
    traj = W.simulate(st, 0.2, taylor_every=1)
    assert all("min_a" in r for r in traj.rows)
    with pytest.raises(W.TaylorConditionError):
        W.simulate(st, 0.2, taylor_every=1, taylor_threshold=10.0)


def test_strip_separation_detected():
    st = state(G32, eta=field(G32, lambda x: 0.6 * np.cos(x)), depth=W.DepthConfig("flat", 1.0))
    with pytest.raises(W.StripSeparationError):
        W.flattening(st)


def test_scaling_trivial_cases():
    st = state(G32, eta=field(G32, lambda x: 1e-4 * np.cos(2 * x)))
    assert W.scaling_check(st, 1) == 0.0
    assert W.scaling_check(W.SurfaceState.rest(G32), 2, t_end=0.2) == 0.0
    with pytest.raises(ValueError):
        W.rescale(st, 1.5)
    with pytest.raises(ValueError):
        W.rescale(state(G32, eta=field(G32, lambda x: 1e-4 * np.cos(8 * x))), 2)


def test_rescale_maps_modes():
    st = state(G32, eta=field(G32, lambda x: np.cos(2 * x)), psi=field(G32, lambda x: np.sin(3 * x)))
    r = W.rescale(st, 2)
    np.testing.assert_allclose(r.eta.values, 0.5 * np.cos(4 * G32.x1d), atol=1e-13)
    np.testing.assert_allclose(r.psi.values, 2**-1.5 * np.sin(6 * G32.x1d), atol=1e-13)


def test_trajectory_csv(tmp_path):
    st = state(G32, eta=field(G32, lambda x: 1e-3 * np.cos(x)))
    traj = W.simulate(st, 0.3, record_every=2)
    path = tmp_path / "traj.csv"
    traj.write_csv(path)
    header = path.read_text().splitlines()[0].split(",")
    assert header[:3] == ["t", "energy", "drift"]


@pytest.mark.parametrize("cfl", [0.5, 0.25])
def test_energy_loss_matches_rk4_amplification(cfl):
    # |R(i theta)|^2 = 1 - theta^6/72 per step for the single excited mode
    k = 4
    st = state(G32, eta=field(G32, lambda x: 1e-3 * np.cos(k * x)))
    t_end = 2 * 2 * math.pi / math.sqrt(k)
    traj = W.simulate(st, t_end, cfl=cfl)
    n = len(traj.rows) - 1
    theta = math.sqrt(k) * t_end / n
    assert traj.rows[-1]["drift"] == pytest.approx(-n * theta**6 / 72, rel=0.02)


def test_mean_elevation_conserved():
    st = state(G32, eta=field(G32, lambda x: 0.05 * np.cos(x) + 0.02), psi=field(G32, lambda x: 0.05 * np.sin(2 * x)))
    nxt = W.step_rk4(st, 0.05)
    assert abs(nxt.eta.coeffs[0] - st.eta.coeffs[0]) <= 1e-10


def test_transport_identity_converges_with_sampling():
    g = PeriodicGrid(1, 32)
    st = state(g, eta=field(g, lambda x: 0.05 * np.cos(x)), psi=field(g, lambda x: 0.05 * np.sin(x)))
    coarse = W.transport_residual(W.sampled_trajectory(st, 4e-2, 3))[0]
    fine = W.transport_residual(W.sampled_trajectory(st, 1e-2, 3))[0]
    assert fine < coarse / 8
