"""Time evolution of the surface unknowns (eta, psi) and derived diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import dn
from .paradiff import (
    CutoffPair,
    DEFAULT_CUTOFF,
    paradiff_apply,
    paraproduct,
    symbol_gamma,
    symbol_lambda,
    symbol_q,
)
from .spectral import (
    PeriodicGrid,
    SpectralField,
    bracket_power,
    derivative,
    gradient,
    inner,
    l2_norm,
    sobolev_norm,
)

CFL_DEFAULT = 0.5


class StripSeparationError(RuntimeError):
    """The surface came too close to the bottom for the strip construction."""


class TaylorConditionError(RuntimeError):
    """The Taylor coefficient dropped below the monitored threshold."""


@dataclass(frozen=True)
class DepthConfig:
    kind: str = "deep"
    H: float | None = None

    def __post_init__(self):
        if self.kind not in ("deep", "flat"):
            raise ValueError("depth kind must be 'deep' or 'flat'")
        if self.kind == "flat" and not (self.H and self.H > 0):
            raise ValueError("flat bottom needs a positive depth H")

    @classmethod
    def parse(cls, text):
        text = str(text).strip().lower()
        if text == "deep":
            return cls()
        if text.startswith("flat"):
            inner_ = text[4:].strip("() ")
            return cls("flat", float(inner_ or 1.0))
        raise ValueError(f"unknown depth configuration {text!r}")

    def __str__(self):
        return "deep" if self.kind == "deep" else f"flat({self.H:g})"


@dataclass(frozen=True)
class SolverSettings:
    """How G(eta) is evaluated for a state."""

    h: float | None = None
    levels: int | None = None
    lower_levels: int = 32
    tol: float = 1e-14
    delta: float | None = None


@dataclass(frozen=True, eq=False)
class SurfaceState:
    t: float
    eta: SpectralField
    psi: SpectralField
    g: float = 1.0
    depth: DepthConfig = field(default_factory=DepthConfig)
    settings: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if self.eta.grid != self.psi.grid:
            raise ValueError("eta and psi live on different grids")
        if not (self.eta.real and self.psi.real):
            raise ValueError("eta and psi must be real fields")

    @property
    def grid(self) -> PeriodicGrid:
        return self.eta.grid

    @property
    def strip_h(self) -> float:
        if self.settings.h is not None:
            return self.settings.h
        return 1.0 if self.depth.kind == "deep" else 0.5 * self.depth.H

    def with_fields(self, t, eta, psi):
        return replace(self, t=t, eta=eta, psi=psi)

    @classmethod
    def rest(cls, grid, **kw):
        z = SpectralField.zeros(grid)
        return cls(0.0, z, z, **kw)


def flattening(state: SurfaceState) -> dn.FlattenedMap:
    h = state.strip_h
    eta_min = float(np.min(state.eta.values))
    if state.depth.kind == "flat" and eta_min - h <= -state.depth.H:
        raise StripSeparationError(
            f"t={state.t:.6g}: min eta = {eta_min:.4g} leaves no strip of depth {h:g} above the bottom y = -{state.depth.H:g}")
    s = state.settings
    return dn.build_flattening(state.eta, h, s.delta, bottom=state.depth.kind,
                               depth=None if state.depth.kind == "deep" else state.depth.H,
                               levels=s.levels, lower_levels=s.lower_levels)


class PrecondCache:
    """Shares one preconditioner across ``max_uses`` consecutive nearby solves."""

    def __init__(self, max_uses: int = 8):
        self.max_uses = max_uses
        self.inv = None
        self.uses = 0

    def take(self):
        if self.inv is None or self.uses >= self.max_uses:
            self.inv, self.uses = None, 0
        self.uses += 1
        return self.inv


class _Solver:
    """One flattened map and operator per surface, reused across right-hand sides."""

    def __init__(self, state: SurfaceState, cache: PrecondCache | None = None):
        self.map = flattening(state)
        self.op = dn.StripOperator(self.map, cache.take() if cache else None)
        if cache is not None:
            cache.inv = self.op.preconditioner()
        self.tol = state.settings.tol

    def strip(self, f):
        return dn.solve_dirichlet(self.map, f, self.tol, self.op)

    def G(self, f):
        return dn.dn_from_solution(self.strip(f))


def dn_apply(state: SurfaceState, f: SpectralField) -> SpectralField:
    return _Solver(state).G(f)


def _rhs_parts(state: SurfaceState, cache: PrecondCache | None = None):
    solver = _Solver(state, cache)
    Gpsi = solver.G(state.psi)
    ge = [np.asarray(c.values) for c in gradient(state.eta)]
    gp = [np.asarray(c.values) for c in gradient(state.psi)]
    G = np.asarray(Gpsi.values)
    g2 = sum(c * c for c in ge)
    dot = sum(a * b for a, b in zip(ge, gp))
    p2 = sum(c * c for c in gp)
    dpsi = -state.g * np.asarray(state.eta.values) - 0.5 * p2 + 0.5 * (dot + G) ** 2 / (1 + g2)
    grid = state.grid
    return Gpsi.dealiased(), SpectralField.from_values(grid, dpsi).dealiased(), Gpsi


def rhs(state: SurfaceState):
    """(d eta / dt, d psi / dt) with every product dealiased."""
    deta, dpsi, _ = _rhs_parts(state)
    return deta, dpsi


def cfl_limit(grid: PeriodicGrid, g: float, cfl: float = CFL_DEFAULT) -> float:
    return cfl / math.sqrt(g * grid.kmax)


def step_rk4(state: SurfaceState, dt: float, cfl: float = CFL_DEFAULT, first_stage=None,
             cache: PrecondCache | None = None) -> SurfaceState:
    """Classical fourth-order Runge-Kutta step."""
    if not dt > 0:
        raise ValueError("time step must be positive")
    limit = cfl_limit(state.grid, state.g, cfl)
    if dt > limit * (1 + 1e-12):
        raise ValueError(f"dt = {dt:.4g} exceeds the CFL bound {limit:.4g} (c_cfl = {cfl})")
    t, e0, p0 = state.t, state.eta, state.psi
    cache = cache if cache is not None else PrecondCache(4)

    def stage(e, p, tt):
        d1, d2, _ = _rhs_parts(state.with_fields(tt, e, p), cache)
        return d1, d2

    k1 = first_stage if first_stage is not None else stage(e0, p0, t)
    k2 = stage(e0 + (0.5 * dt) * k1[0], p0 + (0.5 * dt) * k1[1], t + 0.5 * dt)
    k3 = stage(e0 + (0.5 * dt) * k2[0], p0 + (0.5 * dt) * k2[1], t + 0.5 * dt)
    k4 = stage(e0 + dt * k3[0], p0 + dt * k3[1], t + dt)
    eta = e0 + (dt / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    psi = p0 + (dt / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return state.with_fields(t + dt, eta, psi)


def energy(state: SurfaceState, Gpsi: SpectralField | None = None) -> float:
    """1/2 <psi, G psi> + g/2 ||eta||^2."""
    if Gpsi is None:
        Gpsi = dn_apply(state, state.psi) if np.any(state.psi.coeffs) else SpectralField.zeros(state.grid)
    return 0.5 * inner(state.psi, Gpsi) + 0.5 * state.g * l2_norm(state.eta) ** 2


# --- trace quantities -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TraceVelocities:
    B: SpectralField
    V: tuple
    a_taylor: SpectralField
    Gpsi: SpectralField

    def reconstruction_defect(self, state: SurfaceState) -> float:
        """max |grad psi - (V + B grad eta)|."""
        worst = 0.0
        B = np.asarray(self.B.values)
        for gp, ge, v in zip(gradient(state.psi), gradient(state.eta), self.V):
            worst = max(worst, float(np.max(np.abs(np.asarray(gp.values) - np.asarray(v.values) - B * np.asarray(ge.values)))))
        return worst


def trace_velocities(state: SurfaceState, taylor: bool = True) -> TraceVelocities:
    """B = (grad eta . grad psi + G psi)/(1 + |grad eta|^2), V = grad psi - B grad eta."""
    grid = state.grid
    solver = _Solver(state)
    sol = solver.strip(state.psi)
    Gpsi = dn.dn_from_solution(sol)
    ge = [np.asarray(c.values) for c in gradient(state.eta)]
    gp = [np.asarray(c.values) for c in gradient(state.psi)]
    g2 = sum(c * c for c in ge)
    B = (sum(a * b for a, b in zip(ge, gp)) + np.asarray(Gpsi.values)) / (1 + g2)
    V = tuple(SpectralField.from_values(grid, p - B * e) for p, e in zip(gp, ge))
    if taylor:
        a = dn.taylor_coefficient(sol, state.g, tol=state.settings.tol).taylor_a
    else:
        a = SpectralField.from_values(grid, np.full(grid.shape, state.g))
    return TraceVelocities(SpectralField.from_values(grid, B), V, a, Gpsi)


def taylor_coefficient(state: SurfaceState) -> SpectralField:
    solver = _Solver(state)
    return dn.taylor_coefficient(solver.strip(state.psi), state.g, tol=state.settings.tol).taylor_a


def gb_identity_residual(state: SurfaceState) -> float:
    """||<D>^{-1/2}(G(eta) B + div V)||_{L^2}; zero in the continuum without bottom."""
    if state.depth.kind != "deep":
        raise ValueError("the identity G(eta)B = -div V holds without bottom only")
    tv = trace_velocities(state, taylor=False)
    GB = dn_apply(state, tv.B)
    div = sum((derivative(v, ax) for ax, v in enumerate(tv.V)), SpectralField.zeros(state.grid))
    return dn.h_minus_half_norm(GB + div)


# --- good unknowns --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GoodUnknowns:
    s: float
    U: tuple
    theta: SpectralField
    u: SpectralField
    gamma: object
    V: tuple

    def reassembly_defect(self) -> float:
        """max |<D>^s Re(u) - U_s| (d = 1)."""
        back = bracket_power(SpectralField.from_values(self.u.grid, np.real(np.asarray(self.u.values))), self.s)
        return float(np.max(np.abs(np.asarray(back.values) - np.asarray(self.U[0].values))))


def good_unknowns(state: SurfaceState, s: float = 1.5, cut: CutoffPair = DEFAULT_CUTOFF,
                  trace: TraceVelocities | None = None) -> GoodUnknowns:
    """U_s = <D>^s V + T_zeta <D>^s B, theta_s = T_q <D>^s zeta, u = <D>^{-s}(U_s - i theta_s)."""
    grid = state.grid
    if grid.dim != 1:
        raise ValueError("the scalar unknown u is built for d = 1")
    tv = trace or trace_velocities(state)
    if float(np.min(tv.a_taylor.values)) <= 0:
        raise TaylorConditionError(f"min a = {float(np.min(tv.a_taylor.values)):.4g} <= 0")
    zeta = gradient(state.eta)
    Bs = bracket_power(tv.B, s)
    U = tuple(bracket_power(v, s) + paraproduct(z, Bs, cut) for v, z in zip(tv.V, zeta))
    lam = symbol_lambda(state.eta)
    q = symbol_q(tv.a_taylor, lam)
    gam = symbol_gamma(tv.a_taylor, lam)
    theta = paradiff_apply(q, bracket_power(zeta[0], s), cut)
    u = bracket_power(U[0] - 1j * theta, -s)
    return GoodUnknowns(s, U, theta, u, gam, tv.V)


def reduction_residual(trajectory, s: float = 1.5, cut: CutoffPair = DEFAULT_CUTOFF):
    """Defect f = d_t u + 1/2 (T_V d_x + d_x T_V) u + i T_gamma u at interior snapshots.

    ``trajectory`` is a sequence of equally spaced SurfaceStates; d_t u is a
    centered difference. Returns (times, ||f||_{H^s}, ||u||_{H^s}).
    """
    states = list(trajectory)
    if len(states) < 3:
        raise ValueError("need at least three snapshots for centered differences")
    times = np.array([st.t for st in states])
    steps = np.diff(times)
    if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * np.max(steps):
        raise ValueError("snapshots must be equally spaced in time")
    dt = float(steps[0])
    omega = math.sqrt(states[0].g * states[0].grid.kmax)
    if omega * dt > 0.5:
        raise ValueError(f"time sampling too coarse: omega_max dt = {omega * dt:.3g} > 0.5")
    gus = [good_unknowns(st, s, cut) for st in states]
    out_t, out_f, out_u = [], [], []
    for i in range(1, len(states) - 1):
        u = gus[i].u
        dtu = (gus[i + 1].u - gus[i - 1].u) * (1.0 / (2 * dt))
        V = gus[i].V[0]
        ux = derivative(u)
        transport = 0.5 * (paraproduct(V, ux, cut) + derivative(paraproduct(V, u, cut)))
        disp = 1j * paradiff_apply(gus[i].gamma, u, cut)
        f = dtu + transport + disp
        out_t.append(times[i])
        out_f.append(sobolev_norm(f, s))
        out_u.append(sobolev_norm(u, s))
    return np.array(out_t), np.array(out_f), np.array(out_u)


def transport_residual(trajectory) -> np.ndarray:
    """||(d_t + V d_x) zeta - G(eta) V + (d_x V) zeta||_{L^2} at interior snapshots (d = 1, deep)."""
    states = list(trajectory)
    dt = states[1].t - states[0].t
    out = []
    for i in range(1, len(states) - 1):
        st = states[i]
        zeta = derivative(st.eta)
        dtz = (derivative(states[i + 1].eta) - derivative(states[i - 1].eta)) * (1.0 / (2 * dt))
        tv = trace_velocities(st, taylor=False)
        V = tv.V[0]
        Vv, zv = np.asarray(V.values), np.asarray(zeta.values)
        adv = SpectralField.from_values(st.grid, Vv * np.asarray(derivative(zeta).values))
        GV = dn_apply(st, V)
        stretch = SpectralField.from_values(st.grid, np.asarray(derivative(V).values) * zv)
        out.append(l2_norm(dtz + adv - GV + stretch))
    return np.array(out)


# --- runs -----------------------------------------------------------------------------------


@dataclass
class Trajectory:
    states: list
    rows: list

    def write_csv(self, path):
        from .io import write_trajectory_csv

        write_trajectory_csv(path, self.rows)


def simulate(state: SurfaceState, t_end: float, dt_max: float | None = None, cfl: float = CFL_DEFAULT,
             record_every: int = 1, keep_states: bool = False, taylor_every: int = 0,
             taylor_threshold: float | None = None) -> Trajectory:
    """Integrate to ``t_end`` with equal RK4 steps no larger than the CFL bound.

    Energy is recorded from the first-stage G(eta) psi of each step, so it
    costs no extra solve. ``taylor_every > 0`` also solves for the Taylor
    coefficient every that many steps and, with ``taylor_threshold`` = c,
    halts when min a < c / 2.
    """
    limit = cfl_limit(state.grid, state.g, cfl)
    dt_max = limit if dt_max is None else min(dt_max, limit)
    span = t_end - state.t
    n = max(1, int(math.ceil(span / dt_max - 1e-12)))
    dt = span / n
    cache = PrecondCache()
    e0 = None
    rows, states = [], [state] if keep_states else []
    cur = state
    for i in range(n + 1):
        deta, dpsi, Gpsi = _rhs_parts(cur, cache)
        E = energy(cur, Gpsi)
        if e0 is None:
            e0 = E
        if i % record_every == 0 or i == n:
            row = {"t": cur.t, "energy": E, "drift": (E - e0) / e0 if e0 else E - e0,
                   "eta_l2": l2_norm(cur.eta), "psi_h1": sobolev_norm(cur.psi, 1.0),
                   "mean_eta": float(np.real(cur.eta.coeffs.ravel()[0]))}
            if taylor_every and i % taylor_every == 0:
                a_min = float(np.min(taylor_coefficient(cur).values))
                row["min_a"] = a_min
                if taylor_threshold is not None and a_min < 0.5 * taylor_threshold:
                    raise TaylorConditionError(f"t={cur.t:.6g}: min a = {a_min:.4g} < c/2 = {0.5 * taylor_threshold:.4g}")
            rows.append(row)
        if i == n:
            break
        cur = step_rk4(cur, dt, cfl, first_stage=(deta, dpsi), cache=cache)
        if keep_states:
            states.append(cur)
    if not keep_states:
        states = [cur]
    return Trajectory(states, rows)


def evolve(state: SurfaceState, t_end: float, dt_max: float | None = None, cfl: float = CFL_DEFAULT) -> SurfaceState:
    limit = cfl_limit(state.grid, state.g, cfl)
    dt_max = limit if dt_max is None else min(dt_max, limit)
    span = t_end - state.t
    if span <= 0:
        return state
    n = max(1, int(math.ceil(span / dt_max - 1e-12)))
    cur, cache = state, PrecondCache()
    for _ in range(n):
        cur = step_rk4(cur, span / n, cfl, cache=cache)
    return cur


def sampled_trajectory(state: SurfaceState, dt: float, count: int, cfl: float = CFL_DEFAULT):
    """``count`` snapshots spaced by dt (one RK4 step each)."""
    out = [state]
    cur, cache = state, PrecondCache()
    for _ in range(count - 1):
        cur = step_rk4(cur, dt, cfl, cache=cache)
        out.append(cur)
    return out


def measure_frequency(state: SurfaceState, k: int, periods: float = 2.0, samples_per_step: int = 1,
                      cfl: float = CFL_DEFAULT):
    """Fit A cos(omega t) + B sin(omega t) + C to the mode-k elevation coefficient."""
    from scipy.optimize import curve_fit

    grid = state.grid
    idx = (k,) + (0,) * (grid.dim - 1)
    g = state.g
    omega_guess = math.sqrt(g * k * (1.0 if state.depth.kind == "deep" else math.tanh(state.depth.H * k)))
    t_end = state.t + periods * 2 * math.pi / omega_guess
    limit = cfl_limit(grid, g, cfl)
    n = int(math.ceil((t_end - state.t) / limit))
    dt = (t_end - state.t) / n
    ts, ys = [], []
    cur, cache = state, PrecondCache()
    for i in range(n + 1):
        ts.append(cur.t)
        ys.append(np.real(cur.eta.coeffs[idx]))
        if i < n:
            cur = step_rk4(cur, dt, cfl, cache=cache)
    ts, ys = np.array(ts), np.array(ys)
    model = lambda t, a, b, c, w: a * np.cos(w * t) + b * np.sin(w * t) + c
    p0 = [ys[0], 0.0, 0.0, omega_guess]
    popt, _ = curve_fit(model, ts, ys, p0=p0, maxfev=20000)
    return float(abs(popt[3])), omega_guess


# --- scaling --------------------------------------------------------------------------------


def rescale(state: SurfaceState, lam: int, tol: float = 1e-10) -> SurfaceState:
    """eta -> lam^{-1} eta(lam x), psi -> lam^{-3/2} psi(lam x) on the same torus."""
    if int(lam) != lam or lam < 1:
        raise ValueError("lambda must be a positive integer so that x -> lam x maps the torus to itself")
    lam = int(lam)
    grid = state.grid
    # modes that would be pushed past the dealiasing cutoff must carry no more than tol (relative)

    def dilate(f, amp):
        src = f.coeffs
        scale = max(float(np.max(np.abs(src))), 1e-300)
        m = [mi.astype(int) * lam for mi in grid.mode_index]
        inside = grid.dealias_mask.copy()
        for mi in m:
            inside &= np.abs(mi) < grid.dealias_fraction * grid.n / 2
        lost = np.abs(src[~inside])
        if lost.size and lost.max() > tol * scale:
            raise ValueError("rescaled data leaves the dealiased band; refine the grid")
        c = np.zeros(grid.shape, dtype=complex)
        c[tuple(mi[inside] % grid.n for mi in m)] = amp * src[inside]
        return SpectralField(grid, c, True)

    return state.with_fields(state.t, dilate(state.eta, lam**-1.0), dilate(state.psi, lam**-1.5))


def scaling_check(state: SurfaceState, lam: int, t_end: float = 1.0, cfl: float = CFL_DEFAULT) -> float:
    """Relative defect between evolving rescaled data and rescaling the evolution.

    Compares eta_lam(t_end) against lam^{-1} eta(sqrt(lam) t_end, lam x).
    """
    if state.depth.kind != "deep":
        raise ValueError("scaling invariance holds without bottom only")
    if lam == 1:
        return 0.0
    scaled0 = rescale(state, lam)
    left = evolve(scaled0, state.t + t_end, cfl=cfl)
    right_base = evolve(state, state.t + math.sqrt(lam) * t_end, cfl=cfl)
    right = rescale(right_base, lam)
    num = math.hypot(l2_norm(left.eta - right.eta), l2_norm(left.psi - right.psi))
    den = math.hypot(l2_norm(right.eta), l2_norm(right.psi))
    return 0.0 if den == 0 else num / den
