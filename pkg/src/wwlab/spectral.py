"""Periodic-grid spectral infrastructure.

Grids, normalized Fourier coefficients, Fourier multipliers, the smooth
Littlewood-Paley decomposition, dealiased products and the Sobolev / Zygmund
norm estimators that the rest of the package measures everything with.

Coefficients are stored normalized, ``c = fft(f) / N**dim``, so that
``f(x) = sum_k c_k exp(i k.x)`` and ``||f||_{L^2}^2 = L**dim * sum |c_k|^2``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class ResolutionWarning(UserWarning):
    """A requested frequency block lies outside the resolved range."""


@dataclass(frozen=True)
class PeriodicGrid:
    dim: int = 1
    n: int = 64
    period: float = 2 * math.pi
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 16 or self.n & (self.n - 1):
            raise ValueError(f"points per axis must be a power of two >= 16, got {self.n}")
        if not self.period > 0:
            raise ValueError("period must be positive")
        if not 0 < self.dealias_fraction <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def dx(self):
        return self.period / self.n

    @cached_property
    def k1d(self):
        return 2 * math.pi * np.fft.fftfreq(self.n, d=1.0 / self.n) / self.period

    @cached_property
    def x1d(self):
        return np.arange(self.n) * self.dx

    @cached_property
    def kvec(self):
        """Wavenumber arrays, one per axis, broadcast to the full grid shape."""
        return tuple(np.meshgrid(*([self.k1d] * self.dim), indexing="ij"))

    @cached_property
    def kvec_odd(self):
        """Wavenumbers with the Nyquist mode zeroed, for odd-order derivatives."""
        k = self.k1d.copy()
        k[self.n // 2] = 0.0
        return tuple(np.meshgrid(*([k] * self.dim), indexing="ij"))

    @cached_property
    def xvec(self):
        return tuple(np.meshgrid(*([self.x1d] * self.dim), indexing="ij"))

    @cached_property
    def kabs(self):
        return np.sqrt(sum(k * k for k in self.kvec))

    @cached_property
    def kbracket(self):
        return np.sqrt(1.0 + self.kabs**2)

    @cached_property
    def mode_index(self):
        """Integer mode numbers m (k = 2 pi m / L), per axis."""
        m = np.fft.fftfreq(self.n, d=1.0 / self.n)
        return tuple(np.meshgrid(*([m] * self.dim), indexing="ij"))

    @cached_property
    def dealias_mask(self):
        cutoff = self.dealias_fraction * self.n / 2
        keep = np.ones(self.shape, dtype=bool)
        for m in self.mode_index:
            keep &= np.abs(m) < cutoff
        return keep

    @property
    def kmax(self):
        """Largest resolved |k| along one axis."""
        return 2 * math.pi * (self.n // 2) / self.period

    @property
    def volume(self):
        return self.period**self.dim


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Normalized Fourier coefficients of a periodic field."""

    grid: PeriodicGrid
    coeffs: np.ndarray
    real: bool = True

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_values(cls, grid, values):
        values = np.asarray(values)
        real = not np.iscomplexobj(values)
        c = np.fft.fftn(values) / grid.n**grid.dim
        return cls(grid, c, real)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128), True)

    @cached_property
    def values(self):
        v = np.fft.ifftn(self.coeffs) * self.grid.n**self.grid.dim
        if self.real:
            v = v.real
        v.setflags(write=False)
        return v

    def with_coeffs(self, coeffs, real=None):
        return SpectralField(self.grid, coeffs, self.real if real is None else real)

    def _check(self, other):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return self.with_coeffs(self.coeffs + other.coeffs, self.real and other.real)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return self.with_coeffs(self.coeffs - other.coeffs, self.real and other.real)
        return NotImplemented

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField):
            return product(self, scalar)
        real = self.real and np.isrealobj(scalar)
        return self.with_coeffs(self.coeffs * scalar, real)

    __rmul__ = __mul__

    def conj(self):
        return SpectralField.from_values(self.grid, np.conj(self.values))

    def dealiased(self):
        return self.with_coeffs(np.where(self.grid.dealias_mask, self.coeffs, 0.0))

    def hermitian_defect(self):
        """Relative violation of c(-k) = conj(c(k))."""
        c = self.coeffs
        flipped = c
        for ax in range(self.grid.dim):
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        scale = max(np.max(np.abs(c)), 1e-300)
        return float(np.max(np.abs(flipped - np.conj(c))) / scale)


def product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise product with 2/3-rule truncation of the result."""
    f._check(g)
    out = SpectralField.from_values(f.grid, f.values * g.values)
    out = SpectralField(f.grid, out.coeffs, f.real and g.real)
    return out.dealiased()


def apply_multiplier(f: SpectralField, m) -> SpectralField:
    """Return the field with coefficients m(k) c(k).

    ``m`` is an array on the grid or a callable of the wavenumber tuple
    ``grid.kvec``. Non-finite values on a mode are rejected.
    """
    grid = f.grid
    vals = m(grid.kvec) if callable(m) else m
    vals = np.broadcast_to(np.asarray(vals), grid.shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError("multiplier is not finite on every resolved wavenumber")
    real = f.real and _is_hermitian_multiplier(vals)
    return SpectralField(grid, vals * f.coeffs, real)


def _is_hermitian_multiplier(vals):
    flipped = vals
    for ax in range(vals.ndim):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    return np.allclose(flipped, np.conj(vals), rtol=1e-13, atol=1e-14)


def derivative(f: SpectralField, axis: int = 0) -> SpectralField:
    return apply_multiplier(f, 1j * f.grid.kvec_odd[axis])


def gradient(f: SpectralField):
    return tuple(derivative(f, ax) for ax in range(f.grid.dim))


def bracket_power(f: SpectralField, s: float) -> SpectralField:
    """<D>^s f."""
    return apply_multiplier(f, f.grid.kbracket**s)


def abs_d(f: SpectralField, power: float = 1.0) -> SpectralField:
    """|D|^power f; the zero mode is mapped to zero for negative powers."""
    kabs = f.grid.kabs
    safe = np.where(kabs > 0, kabs, 1.0)
    return apply_multiplier(f, np.where(kabs > 0, safe**power, 0.0))


# --- Littlewood-Paley ---------------------------------------------------------


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def low_profile(r):
    """psi: 1 on |xi| <= 1/2, 0 on |xi| >= 1, smooth and radial in between."""
    return 1.0 - _smooth_step(2.0 * np.abs(r) - 1.0)


def annulus_profile(r):
    """phi(xi) = psi(xi/2) - psi(xi), supported in 1/2 <= |xi| <= 2."""
    return low_profile(np.asarray(r) / 2.0) - low_profile(r)


PROFILE_DESCRIPTION = (
    "psi(r) = 1 - S(2r - 1), S(t) = e(t) / (e(t) + e(1 - t)), e(t) = exp(-1/t) for t > 0; "
    "phi(r) = psi(r/2) - psi(r)"
)


@dataclass(frozen=True)
class DyadicDecomposition:
    """Dyadic blocks Delta_j = phi(2^-j D), j >= 0, plus Delta_{-1} = psi(D)."""

    grid: PeriodicGrid
    top: int = field(init=False)

    def __post_init__(self):
        kmax_abs = self.grid.kmax * math.sqrt(self.grid.dim)
        object.__setattr__(self, "top", max(0, math.ceil(math.log2(max(kmax_abs, 1.0)))))

    @property
    def indices(self):
        return list(range(-1, self.top + 1))

    def profile(self, j):
        r = self.grid.kabs
        if j == -1:
            return low_profile(r)
        return annulus_profile(r / 2.0**j)

    def low_sum(self, j):
        """Symbol of S_j = sum_{q < j} Delta_q = psi(2^{-j} D)."""
        return low_profile(self.grid.kabs / 2.0**j)

    def resolved(self, j):
        return -1 <= j <= self.top


def lp_block(f: SpectralField, j: int, decomposition: DyadicDecomposition | None = None) -> SpectralField:
    """Delta_j f. Blocks beyond the resolved range give a zero field and a warning."""
    dec = decomposition or DyadicDecomposition(f.grid)
    if j < -1:
        raise ValueError("block index must be >= -1")
    if not dec.resolved(j):
        warnings.warn(f"block {j} lies beyond the grid resolution (top block {dec.top})", ResolutionWarning)
        return SpectralField.zeros(f.grid)
    return apply_multiplier(f, dec.profile(j))


def lp_blocks(f: SpectralField, decomposition: DyadicDecomposition | None = None):
    dec = decomposition or DyadicDecomposition(f.grid)
    return {j: apply_multiplier(f, dec.profile(j)) for j in dec.indices}


# --- norms ---------------------------------------------------------------------


def l2_norm(f: SpectralField) -> float:
    return float(math.sqrt(f.grid.volume * np.sum(np.abs(f.coeffs) ** 2)))


def inner(f: SpectralField, g: SpectralField) -> float:
    """Real L^2 pairing over one period (the fields are assumed real)."""
    f._check(g)
    return float(f.grid.volume * np.real(np.sum(f.coeffs * np.conj(g.coeffs))))


def sobolev_norm(f: SpectralField, s: float) -> float:
    w = f.grid.kbracket ** (2 * s)
    return float(math.sqrt(f.grid.volume * np.sum(w * np.abs(f.coeffs) ** 2)))


def oversampled_values(f: SpectralField, factor: int = 4) -> np.ndarray:
    """Physical values on a grid refined ``factor`` times by zero padding."""
    grid = f.grid
    n, big = grid.n, grid.n * factor
    c = np.fft.fftshift(f.coeffs)
    pad = [((big - n) // 2, (big - n) // 2)] * grid.dim
    c = np.pad(c, pad)
    v = np.fft.ifftn(np.fft.ifftshift(c)) * big**grid.dim
    return v.real if f.real else v


def linf_norm(f: SpectralField, oversample: int = 4) -> float:
    return float(np.max(np.abs(oversampled_values(f, oversample))))


def zygmund_norm(f: SpectralField, r: float, decomposition: DyadicDecomposition | None = None,
                 oversample: int = 4) -> float:
    """sup_j 2^{j r} ||Delta_j f||_{L^inf} over the resolved blocks."""
    dec = decomposition or DyadicDecomposition(f.grid)
    best = 0.0
    for j in dec.indices:
        block = apply_multiplier(f, dec.profile(j))
        best = max(best, 2.0 ** (j * r) * linf_norm(block, oversample))
    return best


def lowpass(f: SpectralField, radius: float) -> SpectralField:
    """Smooth low-pass psi(D / radius) (1 below radius/2, 0 above radius)."""
    return apply_multiplier(f, low_profile(f.grid.kabs / radius))


def sharp_truncate(f: SpectralField, radius: float) -> SpectralField:
    return f.with_coeffs(np.where(f.grid.kabs <= radius, f.coeffs, 0.0))
