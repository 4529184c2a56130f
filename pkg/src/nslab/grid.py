"""Periodic box discretization and Fourier-multiplier operators.

The box is ``[-L, L)^d`` sampled at ``x_i = -L + i*h`` with ``h = 2L/N``.
Spectral coefficients are Fourier-series coefficients (a constant field 1
has coefficient 1 at k = 0) stored in the real-FFT half layout: the last
axis holds ``k >= 0`` only, the remaining modes are implied by Hermitian
symmetry. Physical wavenumbers are ``kappa = pi*k/L``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("NSLAB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class GridSpec:
    dims: int
    n: int
    half_width: float = float(np.pi)

    def __post_init__(self):
        if self.dims not in (2, 3):
            raise ValueError(f"dims must be 2 or 3, got {self.dims}")
        if self.n < 8 or self.n % 2:
            raise ValueError(f"points_per_axis must be even and >= 8, got {self.n}")
        if not self.half_width > 0:
            raise ValueError("box half width must be positive")

    # geometry ---------------------------------------------------------
    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.dims

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dims

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.dims - 1) + (self.n // 2 + 1,)

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dims, 0))

    @cached_property
    def x1d(self) -> np.ndarray:
        return -self.half_width + self.h * np.arange(self.n)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Sample coordinates, one broadcastable array per axis."""
        return tuple(np.meshgrid(*([self.x1d] * self.dims), indexing="ij", sparse=True))

    def mesh(self) -> np.ndarray:
        """Dense coordinate array of shape (dims, N, ..., N)."""
        return np.stack(np.meshgrid(*([self.x1d] * self.dims), indexing="ij"))

    # spectral ---------------------------------------------------------
    @cached_property
    def k_int(self) -> tuple[np.ndarray, ...]:
        """Integer wavevector components in the half layout (broadcastable)."""
        full = np.fft.fftfreq(self.n, 1.0 / self.n)
        half = np.fft.rfftfreq(self.n, 1.0 / self.n)
        out = []
        for ax in range(self.dims):
            k = half if ax == self.dims - 1 else full
            shp = [1] * self.dims
            shp[ax] = k.size
            out.append(k.reshape(shp))
        return tuple(out)

    @cached_property
    def kappa(self) -> tuple[np.ndarray, ...]:
        scale = np.pi / self.half_width
        return tuple(scale * k for k in self.k_int)

    @cached_property
    def kappa2(self) -> np.ndarray:
        return sum(k * k for k in self.kappa) + np.zeros(self.spectral_shape)

    @cached_property
    def inv_kappa2(self) -> np.ndarray:
        k2 = self.kappa2
        out = np.zeros_like(k2)
        np.divide(1.0, k2, out=out, where=k2 > 0)
        return out

    @cached_property
    def inv_kappa(self) -> np.ndarray:
        return np.sqrt(self.inv_kappa2)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on modes kept (no component equal to -N/2 or N/2)."""
        m = np.ones(self.spectral_shape, dtype=bool)
        for k in self.k_int:
            m &= np.abs(k) < self.n // 2
        return m

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Two-thirds rule: keep |k_j| <= N/3 on every axis."""
        m = np.ones(self.spectral_shape, dtype=bool)
        for k in self.k_int:
            m &= np.abs(k) <= self.n / 3.0
        return m

    @cached_property
    def mode_weight(self) -> np.ndarray:
        """Multiplicity of each half-layout mode in the full spectrum."""
        w = np.full(self.spectral_shape, 2.0)
        w[..., 0] = 1.0
        if self.n % 2 == 0:
            w[..., -1] = 1.0
        return w

    # transforms on raw arrays (trailing `dims` axes) -----------------
    def fwd(self, f: np.ndarray) -> np.ndarray:
        return sfft.rfftn(f, axes=self.axes, norm="forward", workers=_workers())

    def inv(self, F: np.ndarray) -> np.ndarray:
        return sfft.irfftn(F, s=self.shape, axes=self.axes, norm="forward", workers=_workers())

    def parseval_sq(self, F: np.ndarray) -> float:
        """Integral of |f|^2 over the box from spectral coefficients."""
        axes = tuple(range(F.ndim - self.dims, F.ndim))
        s = np.sum(self.mode_weight * (F.real**2 + F.imag**2), axis=axes)
        return float(np.sum(s)) * (2.0 * self.half_width) ** self.dims


# ---------------------------------------------------------------------------
# field containers

_RANK_COMPONENTS = {"scalar": lambda d: 1, "vector": lambda d: d, "tensor": lambda d: d * d}


@dataclass(frozen=True, eq=False)
class PhysicalField:
    grid: GridSpec
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == self.grid.dims:
            v = v[None]
        if v.shape[1:] != self.grid.shape:
            raise ValueError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def components(self) -> int:
        return self.values.shape[0]

    @property
    def rank(self) -> str:
        d = self.grid.dims
        for name, fn in _RANK_COMPONENTS.items():
            if self.components == fn(d):
                return name
        return "other"

    def __add__(self, other: PhysicalField) -> PhysicalField:
        _check_same(self, other)
        return PhysicalField(self.grid, self.values + other.values)

    def __sub__(self, other: PhysicalField) -> PhysicalField:
        _check_same(self, other)
        return PhysicalField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> PhysicalField:
        return PhysicalField(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def l2(self) -> float:
        return float(np.sqrt(np.sum(self.values**2) * self.grid.cell_volume))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values**2, axis=0))


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: GridSpec
    coeffs: np.ndarray

    @property
    def components(self) -> int:
        return self.coeffs.shape[0]

    def coeff(self, k: tuple[int, ...]) -> np.ndarray:
        """Coefficients (all components) at integer wavevector k."""
        g = self.grid
        k = tuple(int(x) for x in k)
        if k[-1] < 0:
            return np.conj(self.coeff(tuple(-x for x in k)))
        idx = tuple(x % g.n for x in k[:-1]) + (k[-1],)
        return self.coeffs[(slice(None),) + idx]

    def full(self) -> np.ndarray:
        """Full complex spectrum indexed by fftfreq ordering on every axis."""
        g = self.grid
        phys = g.inv(self.coeffs)
        return sfft.fftn(phys, axes=g.axes, norm="forward")


def _check_same(a: PhysicalField, b: PhysicalField) -> None:
    if a.grid != b.grid or a.values.shape != b.values.shape:
        raise ValueError("fields live on different grids or have different ranks")


def _require(f: PhysicalField, rank: str) -> None:
    if f.rank != rank:
        raise ValueError(f"expected a {rank} field, got {f.components} components")


def scalar(grid: GridSpec, values: np.ndarray) -> PhysicalField:
    return PhysicalField(grid, np.asarray(values, dtype=float)[None])


def vector(grid: GridSpec, values) -> PhysicalField:
    return PhysicalField(grid, np.stack([np.broadcast_to(v, grid.shape) for v in values]).astype(float))


# ---------------------------------------------------------------------------
# transforms

def to_spectral(f: PhysicalField) -> SpectralField:
    return SpectralField(f.grid, f.grid.fwd(f.values))


def to_physical(F: SpectralField) -> PhysicalField:
    if F.coeffs.shape[1:] != F.grid.spectral_shape:
        raise ValueError("coefficient array does not match grid")
    return PhysicalField(F.grid, F.grid.inv(F.coeffs))


def _apply(f: PhysicalField, F: np.ndarray) -> PhysicalField:
    F = F * f.grid.nyquist_mask
    return PhysicalField(f.grid, f.grid.inv(F))


# ---------------------------------------------------------------------------
# multiplier operators on spectral arrays (used directly by the solver)

def leray_hat(grid: GridSpec, U: np.ndarray) -> np.ndarray:
    kap = grid.kappa
    div = sum(kap[j] * U[j] for j in range(grid.dims))
    return np.stack([U[i] - kap[i] * div * grid.inv_kappa2 for i in range(grid.dims)])


def divergence_hat(grid: GridSpec, U: np.ndarray) -> np.ndarray:
    return sum(1j * grid.kappa[j] * U[j] for j in range(grid.dims))


def max_divergence(grid: GridSpec, U: np.ndarray) -> float:
    """Max modal |kappa.U| relative to max |kappa||U|; spectral residual.

    Nyquist modes are skipped: a real field has no well-defined derivative there.
    """
    num = np.max(np.abs(divergence_hat(grid, U)) * grid.nyquist_mask)
    den = np.max(np.sqrt(grid.kappa2) * np.sqrt(np.sum(np.abs(U) ** 2, axis=0)))
    return float(num / den) if den > 0 else 0.0


def pressure_hat(grid: GridSpec, a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Spectrum of R(x)R.(a (x) b) = sum_ij -kappa_i kappa_j/|kappa|^2 (a_i b_j)^."""
    b = a if b is None else b
    kap = grid.kappa
    out = np.zeros(grid.spectral_shape, dtype=complex)
    for i in range(grid.dims):
        for j in range(grid.dims):
            out -= kap[i] * kap[j] * grid.fwd(a[i] * b[j])
    return out * grid.inv_kappa2 * grid.nyquist_mask


# ---------------------------------------------------------------------------
# public operators on fields

def leray_project(u: PhysicalField) -> PhysicalField:
    _require(u, "vector")
    g = u.grid
    return _apply(u, leray_hat(g, g.fwd(u.values)))


def riesz_transform(j: int, f: PhysicalField) -> PhysicalField:
    _require(f, "scalar")
    g = f.grid
    F = g.fwd(f.values)
    return _apply(f, -1j * g.kappa[j] * g.inv_kappa * F)


def gradient(f: PhysicalField) -> PhysicalField:
    """Gradient of a scalar (vector result) or of a vector (tensor, [i*d + j] = d_j f_i)."""
    g = f.grid
    if f.rank not in ("scalar", "vector"):
        raise ValueError("gradient needs a scalar or vector field")
    F = g.fwd(f.values)
    out = np.stack([1j * g.kappa[j] * F[i] for i in range(f.components) for j in range(g.dims)])
    return _apply(f, out)


def divergence(u: PhysicalField) -> PhysicalField:
    _require(u, "vector")
    g = u.grid
    return _apply(u, divergence_hat(g, g.fwd(u.values))[None])


def curl(u: PhysicalField) -> PhysicalField:
    _require(u, "vector")
    g = u.grid
    if g.dims != 3:
        raise ValueError("curl is defined for dims = 3 only")
    U = g.fwd(u.values)
    k = g.kappa
    out = np.stack([
        1j * (k[1] * U[2] - k[2] * U[1]),
        1j * (k[2] * U[0] - k[0] * U[2]),
        1j * (k[0] * U[1] - k[1] * U[0]),
    ])
    return _apply(u, out)


def laplacian(f: PhysicalField) -> PhysicalField:
    g = f.grid
    return _apply(f, -g.kappa2 * g.fwd(f.values))


def inverse_laplacian(f: PhysicalField) -> PhysicalField:
    """Mean mode is annihilated."""
    g = f.grid
    return _apply(f, -g.inv_kappa2 * g.fwd(f.values))


def spectral_divergence_residual(u: PhysicalField) -> float:
    return max_divergence(u.grid, u.grid.fwd(u.values))


def translate(f: PhysicalField, cells: tuple[int, ...]) -> PhysicalField:
    """Exact periodic shift by whole grid cells: result(x) = f(x - cells*h)."""
    return PhysicalField(f.grid, np.roll(f.values, cells, axis=tuple(range(1, f.grid.dims + 1))))
