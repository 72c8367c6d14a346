"""Paradifferential quantization, paraproducts and the surface symbols.

Symbols are tabulated on the physical grid in x and on every grid
wavenumber in xi. Quantization is blockwise: on the dyadic block Delta_j u
the symbol is low-pass filtered in x to frequencies below eps2 * 2^j, which
realizes the admissible cutoff chi(theta, eta) without an O(N^2) convolution.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .fitting import loglog_slope
from .spectral import (
    DyadicDecomposition,
    PeriodicGrid,
    SpectralField,
    _smooth_step,
    annulus_profile,
    apply_multiplier,
    bracket_power,
    gradient,
    l2_norm,
    linf_norm,
    low_profile,
    product,
    sobolev_norm,
    zygmund_norm,
)

RING_STEP = 1.0 / 16.0
RING_RANGE = (0.5, 10.0)


@dataclass(frozen=True)
class CutoffPair:
    """Admissible cutoff chi(theta, eta) and the low-frequency cutoff psi0."""

    eps1: float = 0.1
    eps2: float = 0.2

    def __post_init__(self):
        if not 0 < self.eps1 < self.eps2 < 1:
            raise ValueError("need 0 < eps1 < eps2 < 1")

    def chi(self, theta, eta):
        """1 for |theta| <= eps1 |eta|, 0 for |theta| >= eps2 |eta|; even in theta."""
        theta = np.abs(np.asarray(theta, dtype=float))
        eta = np.abs(np.asarray(eta, dtype=float))
        ratio = np.where(eta > 0, theta / np.where(eta > 0, eta, 1.0), np.where(theta > 0, np.inf, 0.0))
        return 1.0 - _smooth_step((ratio - self.eps1) / (self.eps2 - self.eps1))

    def psi0(self, eta):
        """0 on |eta| <= 1/2, 1 on |eta| >= 1: the complement of Delta_{-1}."""
        return 1.0 - low_profile(np.abs(eta))

    def block_filter(self, theta_abs, j):
        """x-frequency filter applied to the symbol on block j."""
        return self.chi(theta_abs, 2.0**j)

    def describe(self):
        return {"eps1": self.eps1, "eps2": self.eps2, "psi0": "1 - psi(|eta|)"}


DEFAULT_CUTOFF = CutoffPair()


def _grid_frequencies(grid: PeriodicGrid) -> np.ndarray:
    return np.stack([k.ravel() for k in grid.kvec], axis=1)


def _ring_centers(dim: int) -> np.ndarray:
    lo, hi = RING_RANGE
    if dim == 1:
        r = np.arange(lo, hi + 1e-12, RING_STEP)
        return np.concatenate([-r[::-1], r])[:, None]
    radii = np.array([0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 7.5, 10.0])
    ang = np.linspace(0, 2 * math.pi, 12, endpoint=False)
    pts = [(r * math.cos(a), r * math.sin(a)) for r in radii for a in ang]
    return np.array(pts)


def _stencil_offsets(dim: int) -> np.ndarray:
    return np.array(list(itertools.product((-1, 0, 1), repeat=dim)), dtype=float)


@dataclass(frozen=True, eq=False)
class SampledSymbol:
    """p(x, xi) tabulated as ``values[x_point, xi_index]``.

    ``x_point`` runs over the flattened grid (C order) and ``xi_index`` over
    ``freq_set``, which by default is every grid wavenumber in FFT order.
    ``ring_values`` optionally holds a 3^dim stencil around each ring center
    for xi-derivatives.
    """

    grid: PeriodicGrid
    freq_set: np.ndarray
    values: np.ndarray
    order: float
    regularity: float
    label: str = ""
    ring_centers: np.ndarray | None = None
    ring_values: np.ndarray | None = None
    ring_step: float = RING_STEP
    _fn: object = field(default=None, repr=False)

    def __post_init__(self):
        npts = self.grid.n**self.grid.dim
        if self.values.shape != (npts, len(self.freq_set)):
            raise ValueError("symbol table must have shape (grid points, len(freq_set))")
        xi_abs = np.linalg.norm(self.freq_set, axis=1)
        if not np.all(np.isfinite(self.values[:, xi_abs >= 0.5])):
            raise ValueError(f"symbol {self.label!r} is not finite on |xi| >= 1/2")

    @classmethod
    def from_function(cls, grid, fn, order, regularity, label="", ring=True):
        """Tabulate ``fn(xi)``; ``xi`` has shape (M, dim) and fn returns (points, M)."""
        freqs = _grid_frequencies(grid)
        values = np.asarray(fn(freqs), dtype=np.complex128)
        centers = ring_vals = None
        if ring:
            centers = _ring_centers(grid.dim)
            offs = _stencil_offsets(grid.dim) * RING_STEP
            pts = (centers[:, None, :] + offs[None, :, :]).reshape(-1, grid.dim)
            ring_vals = np.asarray(fn(pts), dtype=np.complex128).reshape(-1, len(centers), len(offs))
        return cls(grid, freqs, values, float(order), float(regularity), label, centers, ring_vals,
                   RING_STEP, fn)

    @classmethod
    def from_x_function(cls, f: SpectralField, regularity=0.0, label=""):
        """xi-independent symbol a(x)."""
        vals = np.asarray(f.values).ravel()
        return cls.from_function(f.grid, lambda xi: np.repeat(vals[:, None], len(xi), axis=1),
                                 0.0, regularity, label)

    @classmethod
    def from_multiplier(cls, grid, m, order, label=""):
        """x-independent symbol m(xi); ``m`` maps an (M, dim) array to M values."""
        npts = grid.n**grid.dim
        return cls.from_function(grid, lambda xi: np.broadcast_to(np.asarray(m(xi)), (npts, len(xi))),
                                 order, math.inf, label)

    def evaluate(self, xi):
        if self._fn is None:
            raise ValueError("symbol was built from a bare table; no off-grid evaluation")
        return np.asarray(self._fn(np.atleast_2d(xi)), dtype=np.complex128)

    @cached_property
    def hermitian(self):
        """True when p(x, -xi) = conj p(x, xi), so real inputs give real outputs."""
        grid = self.grid
        if not np.array_equal(self.freq_set, _grid_frequencies(grid)):
            return False
        idx = np.arange(len(self.freq_set)).reshape(grid.shape)
        flipped = idx
        for ax in range(grid.dim):
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        nyq = np.zeros(grid.shape, dtype=bool)
        for m in grid.mode_index:
            nyq |= m == -grid.n // 2
        keep = ~nyq.ravel()
        a = self.values[:, keep]
        b = np.conj(self.values[:, flipped.ravel()][:, keep])
        return bool(np.allclose(a, b, rtol=1e-12, atol=1e-12 * max(1.0, np.max(np.abs(a), initial=0.0))))

    def _combine(self, other, op, order, label):
        if isinstance(other, SampledSymbol):
            if other.grid != self.grid or not np.array_equal(other.freq_set, self.freq_set):
                raise ValueError("symbols tabulated on different sets")
            reg = min(self.regularity, other.regularity)
            f1, f2 = self._fn, other._fn
            fn = None if f1 is None or f2 is None else (lambda xi: op(f1(xi), f2(xi)))
            ring = None
            if self.ring_values is not None and other.ring_values is not None:
                ring = op(self.ring_values, other.ring_values)
            return SampledSymbol(self.grid, self.freq_set, op(self.values, other.values), order, reg, label,
                                 self.ring_centers if ring is not None else None, ring, self.ring_step, fn)
        c = other
        fn = None if self._fn is None else (lambda xi: op(self._fn(xi), c))
        ring = None if self.ring_values is None else op(self.ring_values, c)
        return SampledSymbol(self.grid, self.freq_set, op(self.values, c), self.order, self.regularity,
                             label or self.label, self.ring_centers, ring, self.ring_step, fn)

    def __mul__(self, other):
        if isinstance(other, SampledSymbol):
            return self._combine(other, np.multiply, self.order + other.order, f"{self.label}*{other.label}")
        return self._combine(other, np.multiply, self.order, self.label)

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, SampledSymbol):
            return NotImplemented
        return self._combine(other, np.add, max(self.order, other.order), f"{self.label}+{other.label}")

    def __sub__(self, other):
        if not isinstance(other, SampledSymbol):
            return NotImplemented
        return self._combine(other, np.subtract, max(self.order, other.order), f"{self.label}-{other.label}")

    def column(self, xi_index) -> SpectralField:
        """The x-field p(., xi) at one tabulated frequency."""
        vals = self.values[:, xi_index].reshape(self.grid.shape)
        if np.allclose(vals.imag, 0.0, atol=1e-15 * max(1.0, np.max(np.abs(vals)))):
            vals = vals.real
        return SpectralField.from_values(self.grid, vals)


# --- quantization ----------------------------------------------------------------


def _effective_table(p: SampledSymbol, cut: CutoffPair) -> np.ndarray:
    """sum_j phi_j(xi) [x-filtered p](x, xi): the symbol seen by each output mode."""
    grid = p.grid
    dec = DyadicDecomposition(grid)
    axes = tuple(range(grid.dim))
    table = p.values.reshape(grid.shape + (-1,))
    that = np.fft.fftn(table, axes=axes)
    xi_abs = np.linalg.norm(p.freq_set, axis=1)
    eff = np.zeros_like(table)
    for j in range(0, dec.top + 1):
        w = annulus_profile(xi_abs / 2.0**j)
        cols = np.nonzero(w > 0)[0]
        if cols.size == 0:
            continue
        filt = cut.block_filter(grid.kabs, j)[..., None]
        eff[..., cols] += np.fft.ifftn(that[..., cols] * filt, axes=axes) * w[cols]
    return eff.reshape(p.values.shape)


def paradiff_apply(p: SampledSymbol, u: SpectralField, cut: CutoffPair = DEFAULT_CUTOFF) -> SpectralField:
    """T_p u with blockwise x-filtering of the symbol."""
    if p.grid != u.grid:
        raise ValueError("symbol and field live on different grids")
    grid = u.grid
    if not np.array_equal(p.freq_set, _grid_frequencies(grid)):
        raise ValueError("symbol must be tabulated on every resolved output frequency")
    eff = _effective_table(p, cut)
    coeffs = u.coeffs.ravel()
    if grid.dim == 1:
        out = _kernels.quantize(eff, coeffs, p.freq_set[:, 0], grid.x1d)
    else:
        xpts = np.stack([x.ravel() for x in grid.xvec], axis=1)
        phase = np.exp(1j * xpts @ p.freq_set.T)
        out = np.sum(eff * phase * coeffs[None, :], axis=1)
    out = out.reshape(grid.shape)
    real = u.real and p.hermitian
    return SpectralField.from_values(grid, out.real if real else out)


def _check_pair(a: SpectralField, u: SpectralField):
    if a.grid != u.grid:
        raise ValueError("paraproduct operands live on different grids")


def paraproduct(a: SpectralField, u: SpectralField, cut: CutoffPair = DEFAULT_CUTOFF) -> SpectralField:
    """T_a u = sum_{j >= 0} (chi-filtered a) * Delta_j u."""
    _check_pair(a, u)
    grid = u.grid
    dec = DyadicDecomposition(grid)
    total = np.zeros(grid.shape, dtype=np.complex128)
    for j in range(0, dec.top + 1):
        block = apply_multiplier(u, dec.profile(j))
        if not np.any(block.coeffs):
            continue
        low = apply_multiplier(a, cut.block_filter(grid.kabs, j))
        total += np.asarray(low.values) * np.asarray(block.values)
    real = a.real and u.real
    return SpectralField.from_values(grid, total.real if real else total)


def bony_remainder(a: SpectralField, u: SpectralField, cut: CutoffPair = DEFAULT_CUTOFF) -> SpectralField:
    """R(a, u) = a u - T_a u - T_u a with the product taken on the dealiased grid."""
    _check_pair(a, u)
    return product(a, u) - paraproduct(a, u, cut) - paraproduct(u, a, cut)


def commutator_half(v: SpectralField, u: SpectralField, cut: CutoffPair = DEFAULT_CUTOFF) -> SpectralField:
    """[<D>^{1/2}, T_v] u."""
    return bracket_power(paraproduct(v, u, cut), 0.5) - paraproduct(v, bracket_power(u, 0.5), cut)


# --- symbol norms ----------------------------------------------------------------


def _wrho_norm_columns(cols: np.ndarray, grid: PeriodicGrid, rho: float) -> np.ndarray:
    """W^{rho, inf} norm of every column of ``cols`` (shape (points, C))."""
    if rho < 0:
        raise ValueError("regularity index must be nonnegative")
    axes = tuple(range(grid.dim))
    arr = cols.reshape(grid.shape + (-1,))
    norm = np.max(np.abs(arr), axis=axes)
    if rho == 0:
        return norm
    hat = np.fft.fftn(arr, axes=axes)
    whole = int(math.floor(rho))
    frac = rho - whole
    top = hat
    for order in range(1, whole + 1):
        for combo in itertools.combinations_with_replacement(range(grid.dim), order):
            m = np.ones(grid.shape, dtype=np.complex128)
            for ax in combo:
                m = m * (1j * grid.kvec_odd[ax])
            norm = norm + np.max(np.abs(np.fft.ifftn(hat * m[..., None], axes=axes)), axis=axes)
            if order == whole:
                top = hat * m[..., None]
    if frac > 0:
        dec = DyadicDecomposition(grid)
        best = np.zeros_like(norm)
        for j in dec.indices:
            blk = np.fft.ifftn(top * dec.profile(j)[..., None], axes=axes)
            best = np.maximum(best, 2.0 ** (j * frac) * np.max(np.abs(blk), axis=axes))
        norm = norm + best
    return norm


def seminorm_M(p: SampledSymbol, m: float, rho: float, max_order: int = 2) -> float:
    """Finite-difference proxy of M^m_rho(p), xi-derivatives up to order two.

    Takes the sup over |alpha| <= max_order and over the ring
    1/2 <= |xi| <= 10 of ||(1+|xi|)^{|alpha|-m} d_xi^alpha p||_{W^{rho, inf}}.
    """
    if max_order > 2:
        raise ValueError("ring stencil supports xi-derivatives of order <= 2 only")
    if max_order > 0 and p.ring_values is None:
        raise ValueError("freq_set too sparse for xi-derivatives: symbol has no refinement ring")
    dim, hs = p.grid.dim, p.ring_step
    if p.ring_values is None:
        xi_abs = np.linalg.norm(p.freq_set, axis=1)
        sel = (xi_abs >= RING_RANGE[0]) & (xi_abs <= RING_RANGE[1])
        w = (1 + xi_abs[sel]) ** (-m)
        return float(np.max(_wrho_norm_columns(p.values[:, sel], p.grid, rho) * w, initial=0.0))
    offs = _stencil_offsets(dim).astype(int)
    index = {tuple(o): i for i, o in enumerate(offs)}
    rv = p.ring_values
    weight = 1 + np.linalg.norm(p.ring_centers, axis=1)

    def at(*o):
        return rv[:, :, index[o]]

    zero = (0,) * dim
    terms = [(0, at(*zero))]
    if max_order >= 1:
        for ax in range(dim):
            e = [0] * dim
            e[ax] = 1
            plus, minus = tuple(e), tuple(-c for c in e)
            terms.append((1, (at(*plus) - at(*minus)) / (2 * hs)))
    if max_order >= 2:
        for a1 in range(dim):
            for a2 in range(a1, dim):
                if a1 == a2:
                    e = [0] * dim
                    e[a1] = 1
                    plus, minus = tuple(e), tuple(-c for c in e)
                    d2 = (at(*plus) - 2 * at(*zero) + at(*minus)) / hs**2
                else:
                    pp, pm, mp, mm = ((1, 1), (1, -1), (-1, 1), (-1, -1))
                    d2 = (at(*pp) - at(*pm) - at(*mp) + at(*mm)) / (4 * hs**2)
                terms.append((2, d2))
    best = 0.0
    for order, cols in terms:
        vals = _wrho_norm_columns(cols, p.grid, rho) * weight ** (order - m)
        best = max(best, float(np.max(vals)))
    return best


# --- the surface symbols -----------------------------------------------------------


def _grad_table(eta: SpectralField) -> np.ndarray:
    return np.stack([np.asarray(g.values).ravel() for g in gradient(eta)], axis=1)


def symbol_U(eta: SpectralField) -> SampledSymbol:
    """U(x, xi) = (1 + |grad eta|^2)|xi|^2 - (xi . grad eta)^2 = lambda^2."""
    if not eta.real:
        raise ValueError("surface elevation must be real")
    geta = _grad_table(eta)
    g2 = np.sum(geta**2, axis=1)[:, None]

    def fn(xi):
        xi2 = np.sum(xi**2, axis=1)[None, :]
        return np.maximum((1 + g2) * xi2 - (geta @ xi.T) ** 2, 0.0)

    return SampledSymbol.from_function(eta.grid, fn, 2.0, 1.0, "U")


def symbol_lambda(eta: SpectralField) -> SampledSymbol:
    """lambda(x, xi) = sqrt((1 + |grad eta|^2)|xi|^2 - (xi . grad eta)^2)."""
    U = symbol_U(eta)
    base = U._fn
    return SampledSymbol.from_function(eta.grid, lambda xi: np.sqrt(base(xi)), 1.0, U.regularity, "lambda")


def _as_table(f, grid):
    if isinstance(f, SpectralField):
        return np.asarray(f.values).ravel()
    arr = np.asarray(f, dtype=float)
    return np.broadcast_to(arr, grid.shape).ravel()


def symbols_aA(alpha, beta, grid: PeriodicGrid | None = None, regularity: float = 1.0):
    """Factor the principal part: a + A = -i beta.xi and a A = -alpha |xi|^2.

    ``alpha`` is a field (or array / scalar on ``grid``); ``beta`` is a
    sequence of ``dim`` such entries. Returns (a, A) with Re(-a) = Re(A) > 0.
    """
    grid = grid or (alpha.grid if isinstance(alpha, SpectralField) else None)
    if grid is None:
        raise ValueError("grid required when alpha is not a field")
    al = _as_table(alpha, grid)[:, None]
    be = np.stack([_as_table(b, grid) for b in beta], axis=1)
    if be.shape[1] != grid.dim:
        raise ValueError("beta needs one component per space dimension")

    def disc(xi):
        xi2 = np.sum(xi**2, axis=1)[None, :]
        bx = be @ xi.T
        return bx, 4 * al * xi2 - bx**2

    _, d = disc(_grid_frequencies(grid))
    scale = np.max(np.abs(4 * al), initial=1.0) * grid.kmax**2
    if np.min(d) < -1e-12 * scale:
        i = np.unravel_index(np.argmin(d), d.shape)
        raise ValueError(f"negative discriminant 4 alpha |xi|^2 - (beta.xi)^2 = {d[i]:.3e} at point {i[0]}, mode {i[1]}")

    def fa(xi):
        bx, dd = disc(xi)
        return 0.5 * (-1j * bx - np.sqrt(np.maximum(dd, 0.0)))

    def fA(xi):
        bx, dd = disc(xi)
        return 0.5 * (-1j * bx + np.sqrt(np.maximum(dd, 0.0)))

    a = SampledSymbol.from_function(grid, fa, 1.0, regularity, "a")
    A = SampledSymbol.from_function(grid, fA, 1.0, regularity, "A")
    return a, A


def _taylor_table(a_taylor: SpectralField):
    vals = np.asarray(a_taylor.values).ravel()
    if np.min(vals) <= 0:
        raise ValueError(f"Taylor sign condition violated: min a = {np.min(vals):.3e}")
    return vals[:, None]


def symbol_gamma(a_taylor: SpectralField, lam: SampledSymbol) -> SampledSymbol:
    """gamma = sqrt(a lambda)."""
    av = _taylor_table(a_taylor)
    base = lam._fn
    return SampledSymbol.from_function(lam.grid, lambda xi: np.sqrt(av * base(xi)), 0.5, lam.regularity, "gamma")


def symbol_q(a_taylor: SpectralField, lam: SampledSymbol) -> SampledSymbol:
    """q = sqrt(a / lambda), set to zero at xi = 0 where the low cutoff removes it."""
    av = _taylor_table(a_taylor)
    base = lam._fn

    def fn(xi):
        lv = np.real(base(xi))
        safe = np.where(lv > 0, lv, 1.0)
        return np.where(lv > 0, np.sqrt(av / safe), 0.0)

    return SampledSymbol.from_function(lam.grid, fn, -0.5, lam.regularity, "q")


# --- order regressions -------------------------------------------------------------


def lacunary_field(grid: PeriodicGrid, exponent: float, amplitude: float = 1.0, top: int | None = None):
    """amplitude * sum_j 2^{-j exponent} cos(2^j x), a field of Zygmund regularity ``exponent``."""
    x = grid.xvec[0]
    kcut = grid.dealias_fraction * grid.n / 2
    vals = np.zeros(grid.shape)
    j = 0
    while 2**j < kcut and (top is None or j <= top):
        vals = vals + 2.0 ** (-j * exponent) * np.cos(2**j * x)
        j += 1
    return SpectralField.from_values(grid, amplitude * vals)


def mode(grid: PeriodicGrid, k: int) -> SpectralField:
    return SpectralField.from_values(grid, np.cos(k * grid.xvec[0]))


def order_regressions(n: int = 512, ks=(8, 16, 32, 64, 128), rho: float = 0.5, cut: CutoffPair = DEFAULT_CUTOFF):
    """Measure the three operator-order regressions on N = n, d = 1.

    (a) ||T_lambda u_k|| / ||u_k|| against k (order one);
    (b) ||(T_a T_A - T_{aA}) u_k|| for a, A built from a C^{1+rho} surface;
    (c) ||T_b u_k||_{H^{s-m}} / (||b||_{C^{-m}} ||u_k||_{H^s}) for b in C^{-m}, m = 1/2, s = 1.
    """
    grid = PeriodicGrid(1, n)
    eta = lacunary_field(grid, 1.0 + rho, amplitude=0.1)
    lam = symbol_lambda(eta)
    (deta,) = gradient(eta)
    g2 = 1 + np.asarray(deta.values) ** 2
    alpha = SpectralField.from_values(grid, 1.0 / g2)
    beta = SpectralField.from_values(grid, -2.0 * np.asarray(deta.values) / g2)
    a, A = symbols_aA(alpha, (beta,), regularity=rho)
    aA = a * A
    m_low, s = 0.5, 1.0
    b = lacunary_field(grid, -m_low)
    b_norm = zygmund_norm(b, -m_low)
    ra, rb, rc = [], [], []
    for k in ks:
        u = mode(grid, k)
        nu = l2_norm(u)
        ra.append(l2_norm(paradiff_apply(lam, u, cut)) / nu)
        comp = paradiff_apply(a, paradiff_apply(A, u, cut), cut) - paradiff_apply(aA, u, cut)
        rb.append(l2_norm(comp))
        rc.append(sobolev_norm(paraproduct(b, u, cut), s - m_low) / (b_norm * sobolev_norm(u, s)))
    return {
        "ks": list(ks),
        "rho": rho,
        "a_values": ra,
        "b_values": rb,
        "c_values": rc,
        "slope_a": loglog_slope(ks, ra),
        "slope_b": loglog_slope(ks, rb),
        "slope_c": loglog_slope(ks, rc),
        "bound_b": 2 - rho,
    }


def bony_smoothing_slope(n: int = 512, ks=(8, 16, 32, 64), alpha: float = 0.5):
    """Slope of ||R(a, u_k)||_{H^alpha} / ||u_k|| for a lacunary a in C^alpha."""
    grid = PeriodicGrid(1, n)
    a = lacunary_field(grid, alpha)
    vals = []
    for k in ks:
        u = mode(grid, k)
        vals.append(sobolev_norm(bony_remainder(a, u), alpha) / l2_norm(u))
    return loglog_slope(ks, vals), vals


def commutator_constants(n: int = 256, samples: int = 8, s: float = 1.0, seed: int = 0):
    """C = ||[<D>^{1/2}, T_V] u||_inf / (||V||_{H^s} ||u||_inf) over random pairs."""
    rng = np.random.default_rng(seed)
    grid = PeriodicGrid(1, n)
    out = []
    kcut = int(grid.dealias_fraction * n / 2) - 1
    for _ in range(samples):
        cv = np.zeros(n, complex)
        cu = np.zeros(n, complex)
        for kk in range(1, kcut):
            cv[kk] = (rng.normal() + 1j * rng.normal()) * kk ** (-2.5)
            cu[kk] = (rng.normal() + 1j * rng.normal()) * kk ** (-1.0)
        cv[-np.arange(1, kcut)] = np.conj(cv[1:kcut])
        cu[-np.arange(1, kcut)] = np.conj(cu[1:kcut])
        V = SpectralField(grid, cv)
        u = SpectralField(grid, cu)
        c = linf_norm(commutator_half(V, u)) / (sobolev_norm(V, s) * linf_norm(u))
        out.append(c)
    return out
