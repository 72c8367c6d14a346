"""Dirichlet-Neumann operator through the flattened strip.

The fluid layer is pulled back to the strip -1 < z < 0 by the smoothing map

    rho(x, z) = (1 + z) exp(delta z <D>) eta - z (exp(-(1 + z) delta <D>) eta - h),

and a second, linear element -2 < z < -1 connects rho(x, -1) = eta - h to a
flat level y = -b. The bottom is either a wall at that level (finite depth)
or an exact transparent condition d_y v = |D| v (infinite depth). Both
elements use Chebyshev collocation in z and Fourier collocation in x; the
variable-coefficient system is solved by GMRES, right-preconditioned by
per-mode dense solves of the x-averaged operator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .paradiff import CutoffPair, DEFAULT_CUTOFF, paradiff_apply, symbol_lambda
from .spectral import PeriodicGrid, SpectralField, bracket_power, derivative, gradient, l2_norm

DELTA_DEFAULT = 0.1
K_FLAT = 2.0


class SolverError(RuntimeError):
    """The Krylov iteration did not reach the requested tolerance."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


def cheb(m: int):
    """Chebyshev points t_j = cos(pi j / m) and the differentiation matrix."""
    if m == 0:
        return np.array([1.0]), np.zeros((1, 1))
    t = np.cos(np.pi * np.arange(m + 1) / m)
    c = np.ones(m + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(m + 1)
    dt = t[:, None] - t[None, :]
    d = np.outer(c, 1.0 / c) / (dt + np.eye(m + 1))
    d -= np.diag(d.sum(axis=1))
    return t, d


def default_levels(grid: PeriodicGrid, h: float = 1.0) -> int:
    """Chebyshev degree for the upper element that resolves every dealiased mode."""
    kcut = grid.dealias_fraction * grid.kmax * math.sqrt(grid.dim)
    a = 0.75 * max(h, 1.0) * kcut
    m = int(math.ceil(math.sqrt(64.5 * a))) + 8
    return int(min(max(8 * math.ceil(m / 8), 24), 192))


# --- spectral helpers on stacked arrays (z first, then x axes) ----------------


def _xaxes(grid):
    return tuple(range(-grid.dim, 0))


def _rk(grid):
    """Wavenumber arrays on the real-FFT half grid."""
    k1 = grid.k1d.copy()
    k1[grid.n // 2] = 0.0
    klast = np.abs(np.fft.rfftfreq(grid.n, d=1.0 / grid.n) * 2 * math.pi / grid.period)
    klast_odd = klast.copy()
    klast_odd[-1] = 0.0
    if grid.dim == 1:
        kabs = klast
        kodd = (klast_odd,)
    else:
        K0, K1 = np.meshgrid(grid.k1d, klast, indexing="ij")
        O0, O1 = np.meshgrid(k1, klast_odd, indexing="ij")
        kabs = np.sqrt(K0**2 + K1**2)
        kodd = (O0, O1)
    return kabs, kodd


@dataclass(frozen=True)
class _Wavenumbers:
    grid: PeriodicGrid

    def __post_init__(self):
        kabs, kodd = _rk(self.grid)
        object.__setattr__(self, "kabs", kabs)
        object.__setattr__(self, "kodd", kodd)
        object.__setattr__(self, "k2", kabs**2)

    def fwd(self, a):
        return np.fft.rfftn(a, axes=_xaxes(self.grid))

    def inv(self, a):
        return np.fft.irfftn(a, s=self.grid.shape, axes=_xaxes(self.grid))

    def grad(self, a):
        ah = self.fwd(a)
        return tuple(self.inv(1j * k * ah) for k in self.kodd)

    def lap(self, a):
        return self.inv(-self.k2 * self.fwd(a))

    def absd(self, a):
        return self.inv(self.kabs * self.fwd(a))


# --- geometry --------------------------------------------------------------------


@dataclass(eq=False)
class Element:
    """One Chebyshev element: nodes ordered from its top (index 0) downward."""

    z: np.ndarray
    dz: np.ndarray
    rho: np.ndarray
    rho_z: np.ndarray
    rho_zz: np.ndarray
    grad_rho: tuple
    grad_rho_z: tuple
    lap_rho: np.ndarray

    @property
    def levels(self):
        return len(self.z)

    def coefficients(self):
        g2 = sum(g * g for g in self.grad_rho)
        alpha = self.rho_z**2 / (1 + g2)
        beta = tuple(-2 * self.rho_z * g / (1 + g2) for g in self.grad_rho)
        gamma = (self.rho_zz + alpha * self.lap_rho + sum(b * gz for b, gz in zip(beta, self.grad_rho_z))) / self.rho_z
        return alpha, beta, gamma


def _element_nodes(m, z_top, z_bot):
    t, d = cheb(m)
    z = z_bot + (t + 1) * 0.5 * (z_top - z_bot)
    return z, d * (2.0 / (z_top - z_bot))


@dataclass(eq=False)
class FlattenedMap:
    """The smoothing diffeomorphism on both elements plus its bottom closure."""

    grid: PeriodicGrid
    eta: SpectralField
    h: float
    delta: float
    bottom: str
    depth: float
    elements: list
    delta_requested: float | None = None

    @property
    def upper(self) -> Element:
        return self.elements[0]

    @property
    def lower(self) -> Element:
        return self.elements[1]

    @property
    def z_levels(self):
        return self.upper.z

    @property
    def rho(self):
        return self.upper.rho

    @property
    def rho_z(self):
        return self.upper.rho_z

    @property
    def grad_rho(self):
        return self.upper.grad_rho

    def rho_z_bounds(self):
        return float(min(np.min(e.rho_z) for e in self.elements[:1])), float(np.max(self.upper.rho_z))

    def describe(self):
        return {
            "h": self.h,
            "delta": self.delta,
            "delta_requested": self.delta_requested,
            "bottom": self.bottom,
            "depth": self.depth,
            "levels": [e.levels - 1 for e in self.elements],
        }


def w1inf_norm(eta: SpectralField) -> float:
    vals = np.asarray(eta.values)
    return float(np.max(np.abs(vals)) + sum(np.max(np.abs(np.asarray(g.values))) for g in gradient(eta)))


def build_flattening(eta: SpectralField, h: float = 1.0, delta: float | None = None, *, bottom: str = "deep",
                     depth: float | None = None, levels: int | None = None, lower_levels: int = 32,
                     k_const: float = K_FLAT) -> FlattenedMap:
    """Tabulate rho, d_z rho and friends on both elements.

    ``delta=None`` starts from 0.1 and shrinks it until
    delta ||eta||_{W^{1,inf}} <= h / (2K). An explicit delta that violates the
    bound is rejected. ``bottom`` is "deep" (transparent level at y = -depth,
    default h + 1) or "flat" (wall at y = -depth).
    """
    if not eta.real:
        raise ValueError("surface elevation must be real")
    if h <= 0:
        raise ValueError("strip depth h must be positive")
    grid = eta.grid
    w1 = w1inf_norm(eta)
    bound = h / (2 * k_const)
    requested = delta
    if delta is None:
        delta = DELTA_DEFAULT if DELTA_DEFAULT * w1 <= bound else bound / w1
    elif delta * w1 > bound * (1 + 1e-12):
        raise ValueError(f"smoothing too large: delta*||eta||_W1inf = {delta * w1:.4g} exceeds h/(2K) = {bound:.4g}")
    if bottom not in ("deep", "flat"):
        raise ValueError("bottom must be 'deep' or 'flat'")
    if depth is None:
        depth = h + 1.0 if bottom == "deep" else 2.0 * h
    eta_vals = np.asarray(eta.values)
    if np.min(eta_vals) - h <= -depth:
        raise ValueError(f"strip level eta - h reaches the bottom y = -{depth}: min(eta) - h = {np.min(eta_vals) - h:.4g}")
    levels = levels or default_levels(grid, h)
    sp = _Wavenumbers(grid)
    kb = np.sqrt(1 + sp.k2)
    ehat = sp.fwd(eta_vals)

    z0, d0 = _element_nodes(levels, 0.0, -1.0)
    zz = z0.reshape((-1,) + (1,) * grid.dim)
    P = ehat[None] * np.exp(delta * zz * kb)          # e^{delta z <D>} eta
    Q = ehat[None] * np.exp(-(1 + zz) * delta * kb)    # e^{-(1+z) delta <D>} eta
    dP, dQ = delta * kb * P, delta * kb * Q
    rho_h = (1 + zz) * P - zz * Q
    rho_z_h = P + (1 + zz) * dP - Q + zz * dQ
    rho_zz_h = 2 * dP + (1 + zz) * delta * kb * dP + 2 * dQ - zz * delta * kb * dQ
    rho = sp.inv(rho_h) + h * zz
    rho_z = sp.inv(rho_z_h) + h
    rho_zz = sp.inv(rho_zz_h)
    grad_rho = tuple(sp.inv(1j * k * rho_h) for k in sp.kodd)
    grad_rho_z = tuple(sp.inv(1j * k * rho_z_h) for k in sp.kodd)
    lap_rho = sp.inv(-sp.k2 * rho_h)
    upper = Element(z0, d0, rho, rho_z, rho_zz, grad_rho, grad_rho_z, lap_rho)

    z1, d1 = _element_nodes(lower_levels, -1.0, -2.0)
    zz1 = z1.reshape((-1,) + (1,) * grid.dim)
    span = eta_vals - h + depth
    ones = np.ones_like(zz1)
    rho1 = -depth + (zz1 + 2) * span[None]
    rho1_z = ones * span[None]
    geta = tuple(np.asarray(g.values) for g in gradient(eta))
    grad1 = tuple((zz1 + 2) * g[None] for g in geta)
    grad1_z = tuple(ones * g[None] for g in geta)
    lap_eta = sp.lap(eta_vals)
    lower = Element(z1, d1, rho1, rho1_z, np.zeros_like(rho1), grad1, grad1_z, (zz1 + 2) * lap_eta[None])

    fmap = FlattenedMap(grid, eta, float(h), float(delta), bottom, float(depth), [upper, lower], requested)
    lo, hi = float(np.min(rho_z)), float(np.max(rho_z))
    if lo < min(1.0, h / 2) - 1e-12 or hi > max(1.0, 1.5 * h) + 1e-12:
        raise ValueError(f"d_z rho left [min(1,h/2), max(1,3h/2)]: range [{lo:.4g}, {hi:.4g}]")
    return fmap


# --- the discrete operator ---------------------------------------------------------


class StripOperator:
    """Collocation operator of  d_z^2 v + alpha Lap v + beta.grad d_z v - gamma d_z v  with boundary rows."""

    def __init__(self, fmap: FlattenedMap, precond=None):
        self.fmap = fmap
        self.grid = fmap.grid
        self.sp = _Wavenumbers(fmap.grid)
        self.coef = [e.coefficients() for e in fmap.elements]
        self.sizes = [e.levels for e in fmap.elements]
        self.offsets = np.cumsum([0] + self.sizes)
        self.npts = int(np.prod(self.grid.shape))
        self.size = int(self.offsets[-1]) * self.npts
        # any nearby operator's inverse is a valid preconditioner; callers may share one
        self._precond = precond
        # interior rows are scaled to unit size so the residual floor sits at rounding level
        self.row_scale = []
        for el in fmap.elements:
            d2 = el.dz @ el.dz
            sc = 1.0 / np.sum(np.abs(d2), axis=1)
            sc[0] = sc[-1] = 1.0
            self.row_scale.append(sc.reshape((-1,) + (1,) * self.grid.dim))
        eu, el = fmap.elements
        self.flux_scale = 1.0 / (np.sum(np.abs(eu.dz[-1])) + np.sum(np.abs(el.dz[0])))
        self.bottom_scale = 1.0 / np.sum(np.abs(el.dz[-1]))

    # layout helpers
    def split(self, vec):
        full = vec.reshape((-1,) + self.grid.shape)
        return [full[self.offsets[i]:self.offsets[i + 1]] for i in range(len(self.sizes))]

    def join(self, parts):
        return np.concatenate(parts, axis=0).ravel()

    def dz(self, e, v):
        return np.tensordot(self.fmap.elements[e].dz, v, axes=(1, 0))

    def interior(self, e, v, vz=None):
        el = self.fmap.elements[e]
        alpha, beta, gamma = self.coef[e]
        vz = self.dz(e, v) if vz is None else vz
        vzz = self.dz(e, vz)
        out = vzz + alpha * self.sp.lap(v) - gamma * vz
        for b, g in zip(beta, self.sp.grad(vz)):
            out = out + b * g
        return out

    def apply(self, vec):
        up, lo = self.split(vec)
        eu, el = self.fmap.elements
        vz_u, vz_l = self.dz(0, up), self.dz(1, lo)
        ru = self.interior(0, up, vz_u) * self.row_scale[0]
        rl = self.interior(1, lo, vz_l) * self.row_scale[1]
        ru[0] = up[0]
        ru[-1] = up[-1] - lo[0]
        rl[0] = (vz_u[-1] / eu.rho_z[-1] - vz_l[0] / el.rho_z[0]) * self.flux_scale
        if self.fmap.bottom == "flat":
            rl[-1] = vz_l[-1] * self.bottom_scale
        else:
            rl[-1] = (vz_l[-1] / el.rho_z[-1] - self.sp.absd(lo[-1])) * self.bottom_scale
        return self.join([ru, rl])

    # preconditioner: dense per-mode inverse of the x-averaged operator
    def _mode_matrices(self):
        sp = self.sp
        modes = sp.kabs.shape
        S = int(self.offsets[-1])
        axes = _xaxes(self.grid)
        mats = np.zeros(modes + (S, S), dtype=np.complex128)
        kabs = sp.kabs[..., None, None]
        ik = [1j * k[..., None, None] for k in sp.kodd]
        for e, el in enumerate(self.fmap.elements):
            alpha, beta, gamma = self.coef[e]
            am = alpha.mean(axis=axes)[:, None]
            bm = [b.mean(axis=axes)[:, None] for b in beta]
            gm = gamma.mean(axis=axes)[:, None]
            D = el.dz
            blk = D @ D - gm * D
            blk = blk + sum(ikc * (bmc * D) for ikc, bmc in zip(ik, bm)) if bm else blk
            blk = blk - (am[:, 0][:, None] * np.eye(len(D))) * (kabs**2)
            blk = blk * self.row_scale[e].reshape(-1, 1)
            o = self.offsets[e]
            mats[..., o:o + len(D), o:o + len(D)] = blk
        eu, el = self.fmap.elements
        o1, nu = self.offsets[1], self.sizes[0]
        ru_z = eu.rho_z[-1].mean()
        rl_z0 = el.rho_z[0].mean()
        rl_zb = el.rho_z[-1].mean()
        mats[..., 0, :] = 0
        mats[..., 0, 0] = 1
        mats[..., nu - 1, :] = 0
        mats[..., nu - 1, nu - 1] = 1
        mats[..., nu - 1, o1] = -1
        mats[..., o1, :] = 0
        mats[..., o1, :nu] = eu.dz[-1] / ru_z * self.flux_scale
        mats[..., o1, o1:] = -el.dz[0] / rl_z0 * self.flux_scale
        last = mats.shape[-1] - 1
        mats[..., last, :] = 0
        if self.fmap.bottom == "flat":
            mats[..., last, o1:] = el.dz[-1] * self.bottom_scale
        else:
            mats[..., last, o1:] = el.dz[-1] / rl_zb * self.bottom_scale
            mats[..., last, last] -= sp.kabs * self.bottom_scale
        return mats

    def preconditioner(self):
        S = int(self.offsets[-1])
        if self._precond is not None and self._precond.shape != self.sp.kabs.shape + (S, S):
            self._precond = None
        if self._precond is None:
            mats = self._mode_matrices()
            self._precond = np.linalg.inv(mats)
        return self._precond

    def apply_precond(self, vec):
        inv = self.preconditioner()
        arr = vec.reshape((-1,) + self.grid.shape)
        hat = self.sp.fwd(arr)
        hat = np.moveaxis(hat, 0, -1)
        sol = np.matmul(inv, hat[..., None])[..., 0]
        sol = np.moveaxis(sol, -1, 0)
        return self.sp.inv(sol).ravel()

    def solve(self, rhs, tol=1e-14, restart=60, maxiter=20):
        history = []
        b = rhs.ravel()
        bnorm = np.linalg.norm(b)
        if bnorm == 0:
            return np.zeros_like(b), [0.0]
        AM = LinearOperator((self.size, self.size), matvec=lambda y: self.apply(self.apply_precond(y)), dtype=float)
        y0 = np.zeros_like(b)
        y, info = gmres(AM, b, x0=y0, rtol=tol, atol=0.0, restart=restart, maxiter=maxiter,
                        callback=lambda r: history.append(float(r)), callback_type="pr_norm")
        x = self.apply_precond(y)
        res = float(np.linalg.norm(self.apply(x) - b) / bnorm)
        history.append(res)
        if info != 0 and res > max(100 * tol, 1e-10):
            raise SolverError(f"GMRES stopped at relative residual {res:.3e} (info={info})", history)
        return x, history


# --- solutions ----------------------------------------------------------------------


@dataclass(eq=False)
class StripSolution:
    map: FlattenedMap
    parts: list
    f: SpectralField
    operator: StripOperator = field(repr=False)
    history: list = field(default_factory=list)

    @property
    def v(self):
        """Potential on the upper element, shape (levels, *grid.shape)."""
        return self.parts[0]

    @property
    def alpha(self):
        return self.operator.coef[0][0]

    @property
    def beta(self):
        return self.operator.coef[0][1]

    @property
    def gamma_ell(self):
        return self.operator.coef[0][2]

    def derivative_z(self, e=0):
        return self.operator.dz(e, self.parts[e])

    def interior_residual(self):
        """Max relative residual of the elliptic equation on interior nodes of both elements."""
        worst = 0.0
        for e, v in enumerate(self.parts):
            r = self.operator.interior(e, v)[1:-1]
            vz = self.operator.dz(e, v)
            scale = max(np.max(np.abs(self.operator.dz(e, vz))), np.max(np.abs(v)), 1e-300)
            worst = max(worst, float(np.max(np.abs(r)) / scale))
        return worst

    def lam(self, e=0):
        """Lambda_1 v and Lambda_2 v on element ``e``."""
        return lambda_ops(self.operator, e, self.parts[e])


def lambda_ops(op: StripOperator, e: int, w: np.ndarray):
    """(Lambda_1 w, Lambda_2 w) = (d_z w / d_z rho, grad w - grad rho / d_z rho d_z w)."""
    el = op.fmap.elements[e]
    wz = op.dz(e, w)
    l1 = wz / el.rho_z
    l2 = tuple(g - gr * l1 for g, gr in zip(op.sp.grad(w), el.grad_rho))
    return l1, l2


def _check_f(fmap, f):
    if f.grid != fmap.grid:
        raise ValueError("boundary data and map live on different grids")
    if not f.real:
        raise ValueError("boundary data must be real")


def _rhs(op: StripOperator, top, interior=None, bottom=None):
    parts = [np.zeros((n,) + op.grid.shape) for n in op.sizes]
    if interior is not None:
        for e in range(len(parts)):
            parts[e][1:-1] = interior[e][1:-1] * op.row_scale[e][1:-1]
    parts[0][0] = top
    if bottom is not None:
        parts[-1][-1] = bottom * op.bottom_scale
    return op.join(parts)


def solve_dirichlet(fmap: FlattenedMap, f: SpectralField, tol: float = 1e-14, operator: StripOperator | None = None):
    """Solve the flattened Laplace problem with v = f on z = 0."""
    _check_f(fmap, f)
    op = operator or StripOperator(fmap)
    x, hist = op.solve(_rhs(op, np.asarray(f.values)), tol=tol)
    return StripSolution(fmap, [p.copy() for p in op.split(x)], f, op, hist)


def _surface_normal_derivative(sol_parts, op: StripOperator):
    eu = op.fmap.upper
    vz = op.dz(0, sol_parts[0])[0]
    g2 = sum(g[0] ** 2 for g in eu.grad_rho)
    grads = op.sp.grad(sol_parts[0][0])
    return (1 + g2) / eu.rho_z[0] * vz - sum(gr[0] * gv for gr, gv in zip(eu.grad_rho, grads))


def dn_from_solution(sol: StripSolution) -> SpectralField:
    vals = _surface_normal_derivative(sol.parts, sol.operator)
    return SpectralField.from_values(sol.map.grid, vals)


def dn_exact(fmap: FlattenedMap, f: SpectralField, tol: float = 1e-14, operator: StripOperator | None = None):
    """G(eta) f from the strip solution."""
    return dn_from_solution(solve_dirichlet(fmap, f, tol, operator))


def dn_paralinearized(eta: SpectralField, f: SpectralField, cut: CutoffPair = DEFAULT_CUTOFF) -> SpectralField:
    """T_lambda f."""
    return paradiff_apply(symbol_lambda(eta), f, cut)


def paralinearization_sweep(eta: SpectralField, ks=(8, 16, 32, 64, 128), h: float = 1.0, tol: float = 1e-14,
                           cut: CutoffPair = DEFAULT_CUTOFF):
    """||G(eta) f_k|| and ||(G(eta) - T_lambda) f_k|| for f_k = cos(k x_1), with fitted log-log slopes."""
    from .fitting import loglog_slope

    grid = eta.grid
    fmap = build_flattening(eta, h)
    op = StripOperator(fmap)
    g_norms, r_norms = [], []
    for k in ks:
        if k >= grid.dealias_fraction * grid.n / 2:
            raise ValueError(f"test mode {k} is not resolved on N = {grid.n}")
        f = SpectralField.from_values(grid, np.cos(k * grid.xvec[0]))
        G = dn_exact(fmap, f, tol, op)
        R = G - dn_paralinearized(eta, f, cut)
        g_norms.append(l2_norm(G))
        r_norms.append(l2_norm(R))
    return {
        "ks": list(ks),
        "G_norms": g_norms,
        "remainder_norms": r_norms,
        "slope_G": loglog_slope(ks, g_norms),
        "slope_remainder": loglog_slope(ks, r_norms),
    }


def dn_flat_multiplier(grid: PeriodicGrid, bottom: str = "deep", depth: float | None = None):
    """Closed-form G(0): |k| (deep) or |k| tanh(H |k|) (wall at depth H)."""
    k = grid.kabs
    if bottom == "deep":
        return k
    return k * np.tanh(depth * k)


# --- pressure problem -----------------------------------------------------------------


@dataclass(eq=False)
class PressureSolution:
    map: FlattenedMap
    parts: list
    source: list
    taylor_a: SpectralField
    history: list = field(default_factory=list)

    @property
    def pressure(self):
        return self.parts[0]

    @property
    def F0(self):
        return self.source[0]


def _hessian_sq(op: StripOperator, e: int, v: np.ndarray):
    """|Lambda^2 v|^2 summed over all second derivatives."""
    l1, l2 = lambda_ops(op, e, v)
    first = (l1,) + l2
    total = 0.0
    for i, w in enumerate(first):
        m1, m2 = lambda_ops(op, e, w)
        row = (m1,) + m2
        for j in range(len(row)):
            total = total + row[j] ** 2
    return total, first


def taylor_coefficient(strip: StripSolution, g: float = 1.0, eta: SpectralField | None = None,
                       tol: float = 1e-14) -> PressureSolution:
    """Solve for the pressure-like unknown and return a = g - d_z(wp)/d_z rho at z = 0.

    The unknown is wp = P + g y pulled back to the strip: L wp = -alpha |Lambda^2 v|^2,
    wp = g eta at the top, and at the bottom d_y wp = 0 (wall) or the transparent
    condition applied to wp + |grad phi|^2 / 2, which is harmonic.
    """
    op = strip.operator
    fmap = strip.map
    eta = fmap.eta if eta is None else eta
    sources, grads_bottom = [], None
    for e, v in enumerate(strip.parts):
        hs, first = _hessian_sq(op, e, v)
        alpha = op.coef[e][0]
        sources.append(-alpha * hs)
        if e == len(strip.parts) - 1:
            grads_bottom = first
    bottom = None
    if fmap.bottom == "deep":
        # wp_p = -|grad phi|^2 / 2; data = d_y wp_p - |D| wp_p at the flat bottom level
        e = len(strip.parts) - 1
        first = grads_bottom
        half = 0.5 * sum(w**2 for w in first)
        dy_half = 0.0
        for w in first:
            m1, _ = lambda_ops(op, e, w)
            dy_half = dy_half + w * m1
        wp_p = -half[-1]
        dy_wp_p = -dy_half[-1]
        bottom = dy_wp_p - op.sp.absd(wp_p)
    rhs = _rhs(op, g * np.asarray(eta.values), sources, bottom)
    x, hist = op.solve(rhs, tol=tol)
    parts = [p.copy() for p in op.split(x)]
    eu = fmap.upper
    a_vals = g - op.dz(0, parts[0])[0] / eu.rho_z[0]
    return PressureSolution(fmap, parts, sources, SpectralField.from_values(fmap.grid, a_vals), hist)


def taylor_surface_route(eta: SpectralField, psi: SpectralField, fmap: FlattenedMap, g: float = 1.0,
                         operator: StripOperator | None = None) -> SpectralField:
    """Independent a via surface quantities only (d = 1).

    wp + |grad phi|^2 / 2 is harmonic with the same bottom condition as the
    potential, so d_y of it at the surface follows from one more DN solve.
    """
    if eta.grid.dim != 1:
        raise ValueError("surface route implemented for d = 1")
    op = operator or StripOperator(fmap)
    G = lambda f: dn_exact(fmap, f, operator=op)
    ex = np.asarray(derivative(eta).values)
    px = np.asarray(derivative(psi).values)
    Gpsi = np.asarray(G(psi).values)
    B = (ex * px + Gpsi) / (1 + ex**2)
    V = px - B * ex
    Bx = np.asarray(derivative(SpectralField.from_values(eta.grid, B)).values)
    Vx = np.asarray(derivative(SpectralField.from_values(eta.grid, V)).values)
    phi_xy = (Bx + ex * Vx) / (1 + ex**2)
    phi_xx = Vx - phi_xy * ex
    dy_half = V * phi_xy - B * phi_xx
    top = g * np.asarray(eta.values) + 0.5 * (V**2 + B**2)
    Hs = SpectralField.from_values(eta.grid, top)
    Hx = np.asarray(derivative(Hs).values)
    dy_H = (ex * Hx + np.asarray(G(Hs).values)) / (1 + ex**2)
    return SpectralField.from_values(eta.grid, g - (dy_H - dy_half))


def h_minus_half_norm(f: SpectralField) -> float:
    from .spectral import l2_norm

    return l2_norm(bracket_power(f, -0.5))
