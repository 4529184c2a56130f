"""Initial-data and reference-solution generators.

Bump and axisymmetric fields are built as spectral curls of smooth
potentials, so they are divergence free by construction.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import GridSpec, PhysicalField, curl, spectral_divergence_residual, vector


# ---------------------------------------------------------------------------
# Beltrami / ABC

@dataclass(frozen=True)
class BeltramiSpec:
    A: float = 1.0
    B: float = 1.0
    C: float = 1.0
    wavenumber: int = 1

    def eigenvalue(self, grid: GridSpec) -> float:
        if self.wavenumber < 1:
            raise ValueError("wavenumber must be a positive integer")
        return np.pi * self.wavenumber / grid.half_width


def make_abc_flow(spec: BeltramiSpec, grid: GridSpec) -> PhysicalField:
    """ABC field rescaled to the box; curl w = eigenvalue * w."""
    if grid.dims != 3:
        raise ValueError("ABC flows need a 3D grid")
    lam = spec.eigenvalue(grid)
    x1, x2, x3 = (lam * x for x in grid.coords)
    A, B, C = spec.A, spec.B, spec.C
    w = vector(grid, [
        A * np.sin(x3) + C * np.cos(x2),
        B * np.sin(x1) + A * np.cos(x3),
        C * np.sin(x2) + B * np.cos(x1),
    ])
    return PhysicalField(grid, w.values, {"family": "abc", "eigenvalue": lam,
                                          "A": A, "B": B, "C": C})


def abc_sup_norm(spec: BeltramiSpec, samples: int = 256) -> float:
    """sup |w| of the ABC field by dense search over one period."""
    g = GridSpec(3, samples)
    return float(np.max(make_abc_flow(spec, g).magnitude()))


def beltrami_reference(w0: PhysicalField, lam: float, t: float, tol: float = 1e-8) -> PhysicalField:
    """Exact Navier-Stokes solution e^{-lam^2 t} w0 for a curl eigenfield w0."""
    if lam == 0:
        raise ValueError("Beltrami eigenvalue must be nonzero")
    resid = (curl(w0) - w0 * lam).l2()
    if resid > tol * max(w0.l2(), 1e-300):
        raise ValueError(f"w0 is not a curl eigenfield for lambda={lam} (residual {resid:.3e})")
    return w0 * np.exp(-lam * lam * t)


def beltrami_size(w0: PhysicalField, lam: float) -> float:
    """Reference size 1/2 lam^-2 ||w0||_inf^2, i.e. ||w||^2 in L^2_t L^inf_x."""
    return 0.5 * float(np.max(w0.magnitude())) ** 2 / lam**2


# ---------------------------------------------------------------------------
# translated bumps

def smooth_bump(s: np.ndarray) -> np.ndarray:
    """C-infinity profile exp(1 - 1/(1 - s^2)) on |s| < 1, zero outside."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


@dataclass(frozen=True)
class BumpSpec:
    radius: float
    direction: tuple[float, ...] = (1.0, 0.0, 0.0)
    shift: float = 0.0
    amplitude: float = 1.0
    potential_axis: tuple[float, ...] = (0.0, 0.0, 1.0)
    base_center: tuple[float, ...] = (0.0, 0.0, 0.0)

    def center(self) -> np.ndarray:
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            raise ValueError("bump direction must be nonzero")
        return np.asarray(self.base_center, dtype=float) + self.shift * d / n


def make_bump(spec: BumpSpec, grid: GridSpec) -> PhysicalField:
    """Curl of a compactly supported vector potential centered at base + K*direction."""
    if grid.dims != 3:
        raise ValueError("bumps are 3D fields")
    c = spec.center()
    if np.any(np.abs(c) + spec.radius >= grid.half_width):
        raise ValueError(f"bump support (center {c}, radius {spec.radius}) leaves the box")
    if spec.shift < 0:
        raise ValueError("shift magnitude must be >= 0")
    r = np.sqrt(sum((x - ci) ** 2 for x, ci in zip(grid.coords, c)))
    prof = spec.amplitude * smooth_bump(r / spec.radius)
    ax = np.asarray(spec.potential_axis, dtype=float)
    ax = ax / np.linalg.norm(ax)
    pot = vector(grid, [a * prof for a in ax])
    out = curl(pot)
    return PhysicalField(grid, out.values, {"family": "bump", "center": c.tolist(),
                                            "radius": spec.radius})


# ---------------------------------------------------------------------------
# axisymmetric, zero swirl

def c2_taper(s: np.ndarray, start: float, stop: float) -> np.ndarray:
    """1 below ``start``, 0 above ``stop``, quintic smoothstep (C^2) between."""
    x = np.clip((np.asarray(s, dtype=float) - start) / (stop - start), 0.0, 1.0)
    return 1.0 - x**3 * (10.0 - 15.0 * x + 6.0 * x * x)


DECAY_TOL = 1e-2  # largest |A_theta| discarded by the taper, relative to the peak


@dataclass(frozen=True)
class AxisymSpec:
    profile: Callable[[np.ndarray, np.ndarray], np.ndarray]
    taper_stop: float = 0.9
    taper_start: float = 0.75


def gaussian_ring(r: np.ndarray, x3: np.ndarray) -> np.ndarray:
    return r * np.exp(-r * r - x3 * x3)


def make_axisym_zero_swirl(spec: AxisymSpec, grid: GridSpec) -> PhysicalField:
    """curl(A_theta(r, x3) e_theta) with the profile tapered near the box edge."""
    if grid.dims != 3:
        raise ValueError("axisymmetric fields are 3D")
    x1, x2, x3 = grid.coords
    L = grid.half_width
    r = np.sqrt(x1 * x1 + x2 * x2) + 0.0 * x3
    x3b = x3 + 0.0 * r
    a_theta = np.asarray(spec.profile(r, x3b), dtype=float)
    # A_theta / r on the axis from the profile slope
    eps = 1e-8
    on_axis = r == 0
    ratio = np.empty_like(r)
    ratio[~on_axis] = a_theta[~on_axis] / r[~on_axis]
    if np.any(on_axis):
        ratio[on_axis] = np.asarray(spec.profile(np.full(on_axis.sum(), eps), x3b[on_axis])) / eps
    taper = c2_taper(r, spec.taper_start * L, spec.taper_stop * L) * c2_taper(
        np.abs(x3b), spec.taper_start * L, spec.taper_stop * L)
    meta: dict = {"family": "axisym"}
    peak = np.max(np.abs(a_theta))
    cut = taper == 0.0
    edge = np.max(np.abs(a_theta[cut])) if np.any(cut) else 0.0
    if peak > 0 and edge > DECAY_TOL * peak:
        meta["warning"] = f"profile not decayed inside box (edge/peak = {edge / peak:.2e})"
        warnings.warn(meta["warning"], RuntimeWarning, stacklevel=2)
    g = ratio * taper
    # curl of g*(-x2, x1, 0) without the Nyquist mask: the x3-derivative then
    # commutes exactly with multiplication by x1, x2 and the swirl is exactly 0
    k = grid.kappa
    a1, a2 = grid.fwd(-x2 * g), grid.fwd(x1 * g)
    out = np.stack([
        grid.inv(-1j * k[2] * a2),
        grid.inv(1j * k[2] * a1),
        grid.inv(1j * (k[0] * a2 - k[1] * a1)),
    ])
    return PhysicalField(grid, out, meta)


def swirl_component(u: PhysicalField) -> np.ndarray:
    """Azimuthal component u . e_theta about the x3 axis (zero on the axis)."""
    x1, x2, _ = u.grid.coords
    r = np.sqrt(x1 * x1 + x2 * x2)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = (-x2 * u.values[0] + x1 * u.values[1]) / r
    return np.where(r > 0, s, 0.0)


def rotate_quarter(u: PhysicalField) -> PhysicalField:
    """R^{-1} u(R x) for the rotation R by pi/2 about x3; exact on the grid.

    Equals ``u`` for an axisymmetric field.
    """
    n = u.grid.n
    idx = (n - np.arange(n)) % n  # index of -x_i
    # at R x = (-x2, x1, x3): sample [c, idx[j], i, k]
    moved = np.swapaxes(u.values[:, idx, :, :], 1, 2)
    out = np.stack([moved[1], -moved[0], moved[2]])
    return PhysicalField(u.grid, out)


# ---------------------------------------------------------------------------
# 2D data and extension

def taylor_green_2d(grid: GridSpec, amplitude: float = 1.0) -> PhysicalField:
    """(-cos x1 sin x2, sin x1 cos x2), rescaled to the box."""
    if grid.dims != 2:
        raise ValueError("Taylor-Green generator is 2D")
    k = np.pi / grid.half_width
    x1, x2 = (k * x for x in grid.coords)
    return vector(grid, [-amplitude * np.cos(x1) * np.sin(x2), amplitude * np.sin(x1) * np.cos(x2)])


def extend_2d_to_3d(W: PhysicalField, grid3: GridSpec) -> PhysicalField:
    """(W1(x1,x2), W2(x1,x2), 0), constant along x3."""
    g2 = W.grid
    if g2.dims != 2 or grid3.dims != 3:
        raise ValueError("need a 2D field and a 3D grid")
    if g2.n != grid3.n or g2.half_width != grid3.half_width:
        raise ValueError("axes 1-2 of the 3D grid do not match the 2D grid")
    if W.components != 2:
        raise ValueError("need a 2D vector field")
    vals = np.zeros((3,) + grid3.shape)
    vals[:2] = W.values[:, :, :, None]
    return PhysicalField(grid3, vals, {"family": "extended-2d"})


# ---------------------------------------------------------------------------
# seeded random smooth data

@dataclass(frozen=True)
class GaussianEnsembleSpec:
    n_bumps: int = 4
    width: tuple[float, float] = (0.4, 0.8)
    spread: float = 0.5
    amplitude: float = 1.0
    kind: str = "curl"
    band: float | None = None
    extras: dict = field(default_factory=dict)


def gaussian_potential(grid: GridSpec, rng: np.random.Generator, spec: GaussianEnsembleSpec,
                       scale: float = 1.0, components: int | None = None) -> np.ndarray:
    """Superposition of Gaussians; ``scale`` evaluates it at scale * x."""
    L = grid.half_width
    comps = grid.dims if components is None else components
    out = np.zeros((comps,) + grid.shape)
    for _ in range(spec.n_bumps):
        c = rng.uniform(-spec.spread * L, spec.spread * L, grid.dims)
        wdt = rng.uniform(*spec.width)
        amp = rng.normal(size=comps)
        r2 = sum((scale * x - ci) ** 2 for x, ci in zip(grid.coords, c))
        out += amp[(slice(None),) + (None,) * grid.dims] * np.exp(-r2 / (2 * wdt * wdt))
    return spec.amplitude * out


def random_smooth_field(grid: GridSpec, seed: int, spec: GaussianEnsembleSpec | None = None,
                        scale: float = 1.0) -> PhysicalField:
    """Seeded divergence-free (kind='curl') or gradient (kind='grad') field.

    Band-limited to |k| <= band (default N/4). With ``scale`` != 1 the same
    potential is evaluated at scale * x, then differentiated and divided by
    ``scale`` so that the result is f(scale * x).
    """
    spec = spec or GaussianEnsembleSpec()
    rng = np.random.default_rng(seed)
    band = grid.n / 4 if spec.band is None else spec.band
    kabs = np.sqrt(sum(k * k for k in grid.k_int))
    mask = kabs <= band
    if spec.kind == "curl":
        comps = 3 if grid.dims == 3 else 1
        pot = gaussian_potential(grid, rng, spec, scale, comps)
        P = grid.fwd(pot)
        kap = grid.kappa
        if grid.dims == 3:
            U = np.stack([
                1j * (kap[1] * P[2] - kap[2] * P[1]),
                1j * (kap[2] * P[0] - kap[0] * P[2]),
                1j * (kap[0] * P[1] - kap[1] * P[0]),
            ])
        else:
            U = np.stack([1j * kap[1] * P[0], -1j * kap[0] * P[0]])
    elif spec.kind == "grad":
        pot = gaussian_potential(grid, rng, spec, scale, 1)
        P = grid.fwd(pot)
        U = np.stack([1j * k * P[0] for k in grid.kappa])
    else:
        raise ValueError(f"unknown ensemble kind {spec.kind!r}")
    U = U * mask * grid.nyquist_mask / scale
    return PhysicalField(grid, grid.inv(U), {"family": "random", "seed": seed})


def divergence_ok(u: PhysicalField, tol: float = 1e-10) -> bool:
    return spectral_divergence_residual(u) < tol
