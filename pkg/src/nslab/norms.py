"""Weighted, mixed and Sobolev norms, and the scalar threshold functions.

Weights are ``(mu + |x - c|^2)^(a/2)`` with ``c = center + shift * t``;
``a = -1`` gives sigma_mu. At ``mu = 0`` the cell nearest the center
uses a finite singular-cell value (see ``kernels.weighted_sum``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from .grid import GridSpec, PhysicalField, gradient


@dataclass(frozen=True)
class WeightSpec:
    center: tuple[float, ...] = (0.0, 0.0, 0.0)
    mu: float = 0.0
    shift: tuple[float, ...] | None = None
    exponent: float = -1.0

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("regularizer mu must be >= 0")

    def center_at(self, t: float, dims: int) -> np.ndarray:
        c = np.broadcast_to(np.asarray(self.center, dtype=float), (dims,))
        if self.shift is None:
            return c.copy()
        return c + t * np.broadcast_to(np.asarray(self.shift, dtype=float), (dims,))

    def with_mu(self, mu: float) -> WeightSpec:
        return WeightSpec(self.center, mu, self.shift, self.exponent)


def sigma(center=(0.0, 0.0, 0.0), mu: float = 0.0, shift=None) -> WeightSpec:
    """sigma_mu(x - center - shift*t) = (mu + |.|^2)^(-1/2)."""
    return WeightSpec(tuple(np.atleast_1d(center).astype(float)), mu,
                      None if shift is None else tuple(np.atleast_1d(shift).astype(float)), -1.0)


def pointwise_abs(u: PhysicalField) -> np.ndarray:
    return u.magnitude() if u.components > 1 else np.abs(u.values[0])


def grad_sq(u: PhysicalField) -> np.ndarray:
    """|grad u|^2 = sum_ij (d_j u_i)^2 via spectral derivatives."""
    return np.sum(gradient(u).values ** 2, axis=0)


def weighted_density_integral(grid: GridSpec, density: np.ndarray, center, mu: float,
                              expo: float) -> float:
    """Integral of (mu + |x - center|^2)^(expo/2) * density."""
    return kernels.weighted_sum(grid, density, center, mu, expo) * grid.cell_volume


def weighted_lp_norm(u: PhysicalField, p: float, weight: WeightSpec, t: float = 0.0) -> float:
    """(sum weight^p |u|^p cellvol)^(1/p)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    g = u.grid
    expo = weight.exponent * p
    if weight.mu == 0 and expo <= -g.dims:
        raise ValueError(f"|x|^{weight.exponent} is not L^{p}-integrable at the center")
    dens = pointwise_abs(u) ** p
    total = weighted_density_integral(g, dens, weight.center_at(t, g.dims), weight.mu, expo)
    return float(total ** (1.0 / p))


def lp_norm(u: PhysicalField, p: float) -> float:
    if p == math.inf:
        return float(np.max(pointwise_abs(u)))
    if p < 1:
        raise ValueError("p must be >= 1")
    return float((np.sum(pointwise_abs(u) ** p) * u.grid.cell_volume) ** (1.0 / p))


# ---------------------------------------------------------------------------
# time quadrature

def window_integral(times: np.ndarray, values: np.ndarray, a: float, b: float) -> float:
    """Integral over [a, b] of the piecewise-linear interpolant of (times, values).

    Reduces to the trapezoid rule when a and b are sample times.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    tol = 1e-12 * max(1.0, abs(times[-1]))
    if a > b:
        raise ValueError("empty time window")
    if a < times[0] - tol or b > times[-1] + tol:
        raise ValueError(f"window [{a}, {b}] leaves the trajectory span [{times[0]}, {times[-1]}]")
    a, b = max(a, times[0]), min(b, times[-1])
    if a == b:
        return 0.0
    inner = (times > a) & (times < b)
    ts = np.concatenate([[a], times[inner], [b]])
    vs = np.concatenate([[np.interp(a, times, values)], values[inner], [np.interp(b, times, values)]])
    return float(np.sum(0.5 * (vs[1:] + vs[:-1]) * np.diff(ts)))


def cumulative_trapezoid(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    out = np.zeros(len(times))
    out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(times))
    return out


# ---------------------------------------------------------------------------
# mixed space-time norms

@dataclass(frozen=True)
class MixedNormSpec:
    r: float
    q: float
    rule: str = "trapezoid"

    @property
    def admissible(self) -> bool:
        return is_admissible(self.r, self.q)


def _frac(x) -> Fraction:
    """Exact rational for ints/Fractions; floats are read as short decimals."""
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**9)
    return Fraction(x)


def is_admissible(r, q) -> bool:
    """2 <= r < inf and 2/r + 3/q = 1 (exact on rationals; q = inf allowed)."""
    if r == math.inf or r < 2:
        return False
    three_q = Fraction(0) if q == math.inf else 3 / _frac(q)
    return 2 / _frac(r) + three_q == 1


def spatial_norm_series(traj, q: float) -> np.ndarray:
    return np.array([lp_norm(s, q) for s in traj.snapshots])


def mixed_norm(traj, spec: MixedNormSpec, power: bool = False) -> float:
    """(int ||u(t)||_{L^q}^r dt)^(1/r); with ``power`` the integral itself (the size K)."""
    if len(traj.times) == 0:
        raise ValueError("empty trajectory")
    if spec.rule != "trapezoid":
        raise ValueError(f"unknown quadrature rule {spec.rule!r}")
    vals = spatial_norm_series(traj, spec.q) ** spec.r
    t = np.asarray(traj.times, dtype=float)
    total = float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(t))) if len(t) > 1 else 0.0
    return total if power else total ** (1.0 / spec.r)


# ---------------------------------------------------------------------------
# a_mu / B_mu

def a_mu(v: PhysicalField, weight: WeightSpec, t: float = 0.0) -> float:
    """int sigma_mu(x - center - shift t) |v|^2 dx."""
    g = v.grid
    return weighted_density_integral(g, np.sum(v.values**2, axis=0),
                                     weight.center_at(t, g.dims), weight.mu, -1.0)


def weighted_enstrophy_series(traj, weight: WeightSpec) -> np.ndarray:
    g = traj.grid
    return np.array([
        weighted_density_integral(g, traj.grad_sq(i), weight.center_at(t, g.dims), weight.mu, -1.0)
        for i, t in enumerate(traj.times)
    ])


def b_mu(traj, weight: WeightSpec, t0: float, t1: float) -> float:
    """int_{t0}^{t1} int sigma_mu(x - center - shift tau) |grad v|^2 dx dtau."""
    if t1 < t0:
        raise ValueError("need t0 <= t1")
    if t0 == t1:
        window_integral(traj.times, np.zeros(len(traj.times)), t0, t1)
        return 0.0
    return window_integral(traj.times, weighted_enstrophy_series(traj, weight), t0, t1)


# ---------------------------------------------------------------------------
# exponents and thresholds

def _check_p(p: float) -> None:
    if not 2 < p < 3:
        raise ValueError(f"p must lie in (2, 3), got {p}")


def split_level(p: float) -> float:
    """s = (p - 2)/(3 - p)."""
    _check_p(p)
    return (p - 2.0) / (3.0 - p)


def theta1(p: float) -> float:
    return split_level(p) ** (1.0 - p / 3.0)


def theta2(p: float) -> float:
    return split_level(p) ** (1.0 - p / 2.0)


@dataclass(frozen=True)
class Constants:
    """Smallness constants with no canonical value; the defaults only serve comparisons."""
    delta0: float = 0.01
    delta1: float = 0.01
    delta2: float = 0.01
    delta3: float = 0.01
    delta4: float = 0.01
    eps_star: float = 0.05
    eps1: float = 0.1
    k: float = 1.0


# kind -> (constant name, exponent numerator as a function of the size parameter)
_THRESHOLDS = {
    "thm1.7": ("delta0", lambda K: K),
    "prop2.3": ("delta0", lambda K: K),
    "prop2.1": ("delta2", lambda h2: 1.0 + h2 ** (16.0 / 3.0)),
    "prop2.4": ("delta3", lambda s: s),
    "small-data": ("delta4", lambda M: M * M),
}


def smallness_threshold(kind: str, value: float, delta: float | None = None,
                        constants: Constants = Constants()) -> float:
    """delta * exp(-F(value)/delta).

    ``value`` is the size K for 'thm1.7', ||W||^2_{L^2_t L^inf} for 'prop2.3',
    ||w0||_{H^2} for 'prop2.1', lambda^-2 ||w0||^2_inf for 'prop2.4' and M
    for 'small-data'.
    """
    if kind not in _THRESHOLDS:
        raise ValueError(f"unknown threshold kind {kind!r}; choose from {sorted(_THRESHOLDS)}")
    name, fn = _THRESHOLDS[kind]
    d = getattr(constants, name) if delta is None else delta
    if not d > 0:
        raise ValueError("delta must be positive")
    if value < 0:
        raise ValueError("size parameter must be >= 0")
    return d * math.exp(-fn(value) / d)


def sobolev_norm(u: PhysicalField, s: float, homogeneous: bool = False) -> float:
    """H^s (or homogeneous H^s) norm from the Fourier coefficients."""
    if s < 0:
        raise ValueError("s must be >= 0")
    g = u.grid
    F = g.fwd(u.values) * g.nyquist_mask
    mult = g.kappa2**s if homogeneous else (1.0 + g.kappa2) ** s
    if homogeneous and s == 0:
        mult = np.ones_like(g.kappa2)
    return float(np.sqrt(g.parseval_sq(F * np.sqrt(mult))))
