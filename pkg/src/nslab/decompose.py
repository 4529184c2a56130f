"""Threshold splitting of initial data and the small-L^3 gate.

``u0 = P u0[|x - c||u0| <= s] + P u0[|x - c||u0| > s] = w0 + v0``.
Ratios against the elementary bounds are reported, never pass/fail:
the constants involved are not numeric.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .grid import PhysicalField, leray_project
from .norms import (MixedNormSpec, lp_norm, mixed_norm, pointwise_abs, split_level, theta1,
                    theta2, weighted_lp_norm, WeightSpec)


def distance_to(grid, center) -> np.ndarray:
    """Minimum-image |x - center| on the grid."""
    d2, _ = kernels.axis_offsets(grid, center)
    return np.sqrt(sum(np.reshape(a, [-1 if i == ax else 1 for i in range(grid.dims)])
                       for ax, a in enumerate(d2)) + np.zeros(grid.shape))


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


@dataclass
class SplitResult:
    w0: PhysicalField
    v0: PhysicalField
    s: float
    center: tuple[float, ...]
    low: PhysicalField          # unprojected u0 on {|x-c||u0| <= s}
    high: PhysicalField         # unprojected u0 on {|x-c||u0| > s}
    mask: np.ndarray            # True on the low part
    norms: dict = field(default_factory=dict)
    ratios: dict = field(default_factory=dict)

    def report(self) -> str:
        lines = [f"threshold s = {self.s:.12g}", f"center = {list(self.center)}"]
        lines += [f"norm {k} = {v:.12e}" for k, v in sorted(self.norms.items())]
        lines += [f"ratio {k} = {v:.12e}" for k, v in sorted(self.ratios.items())]
        return "\n".join(lines) + "\n"


def threshold_split(u0: PhysicalField, s: float, center=(0.0, 0.0, 0.0)) -> SplitResult:
    if s < 0:
        raise ValueError("threshold s must be >= 0")
    g = u0.grid
    c = tuple(float(x) for x in np.broadcast_to(np.asarray(center, float), (g.dims,)))
    mask = distance_to(g, c) * pointwise_abs(u0) <= s
    low = PhysicalField(g, u0.values * mask)
    high = PhysicalField(g, u0.values * ~mask)
    w0, v0 = leray_project(low), leray_project(high)
    res = SplitResult(w0, v0, float(s), c, low, high, mask)
    res.norms = {
        "w0_L3": lp_norm(w0, 3),
        "v0_weighted_L2": weighted_lp_norm(v0, 2, WeightSpec(c, 0.0, None, -0.5)),
        "low_L3": lp_norm(low, 3),
        "high_weighted_L2": weighted_lp_norm(high, 2, WeightSpec(c, 0.0, None, -0.5)),
    }
    return res


def gap_split(u0: PhysicalField, p: float, center=(0.0, 0.0, 0.0)) -> SplitResult:
    """Split at s = (p-2)/(3-p) and attach the estimate ratios.

    With N = || |x-c|^alpha u0 ||_{L^p}, alpha = 1 - 3/p:
    rho1 = ||w0||_3 / (theta1 N^{p/3}), rho2 = || |x-c|^{-1/2} v0 ||_2 / (theta2 N^{p/2}),
    and the unprojected versions with s^{1-p/3}, s^{1-p/2} in place of theta1, theta2.
    """
    s = split_level(p)
    res = threshold_split(u0, s, center)
    alpha = 1.0 - 3.0 / p
    N = weighted_lp_norm(u0, p, WeightSpec(res.center, 0.0, None, alpha))
    res.norms["weighted_Lp"] = N
    res.norms["p"] = p
    th1, th2 = theta1(p), theta2(p)
    res.ratios = {
        "rho1": _ratio(res.norms["w0_L3"], th1 * N ** (p / 3)),
        "rho2": _ratio(res.norms["v0_weighted_L2"], th2 * N ** (p / 2)),
        "elementary1": elementary_ratios(res, p, N)[0],
        "elementary2": elementary_ratios(res, p, N)[1],
    }
    return res


def elementary_ratios(res: SplitResult, p: float, N: float | None = None) -> tuple[float, float]:
    """||u_{<=s}||_3 / (s^{1-p/3} N^{p/3}) and || |x|^{-1/2} u_{>s} ||_2 / (s^{1-p/2} N^{p/2})."""
    if N is None:
        N = weighted_lp_norm(res.low + res.high, p, WeightSpec(res.center, 0.0, None, 1.0 - 3.0 / p))
    s = res.s
    if s == 0:
        return 0.0, 0.0
    return (_ratio(res.norms["low_L3"], s ** (1 - p / 3) * N ** (p / 3)),
            _ratio(res.norms["high_weighted_L2"], s ** (1 - p / 2) * N ** (p / 2)))


@dataclass
class KatoResult:
    passed: bool
    norm_L3: float
    eps1: float
    l5_ratio: float | None = None

    def report(self) -> str:
        out = f"kato pass={int(self.passed)} w0_L3={self.norm_L3:.12e} eps1={self.eps1:g}\n"
        if self.l5_ratio is not None:
            out += f"L5tL5 / L3 ratio = {self.l5_ratio:.12e}\n"
        return out


def kato_check(w0: PhysicalField, eps1: float = 0.1, traj=None) -> KatoResult:
    """Gate ||w0||_{L^3} < eps1; with a trajectory also ||w||_{L^5_t L^5_x} / ||w0||_{L^3}."""
    n3 = lp_norm(w0, 3)
    ratio = None
    if traj is not None:
        ratio = _ratio(mixed_norm(traj, MixedNormSpec(5, 5)), n3)
    return KatoResult(n3 < eps1, n3, eps1, ratio)


def theta_table(ps, M: float, delta1: float = 0.01) -> list[tuple[float, float]]:
    """(p, theta2(p) e^{M^2/delta1}) for the choice of p_M -> 3^-."""
    return [(float(p), theta2(p) * math.exp(M * M / delta1)) for p in ps]


def compact_bump_field(grid, seed: int, n_bumps: int = 3, amplitude: float = 3.0) -> PhysicalField:
    """Seeded divergence-free field: curl of a few compactly supported bumps near the origin."""
    from .fields import smooth_bump
    from .grid import curl, vector

    rng = np.random.default_rng(seed)
    pot = np.zeros((3,) + grid.shape)
    for _ in range(n_bumps):
        c = rng.uniform(-1.0, 1.0, 3)
        rad = rng.uniform(0.8, 1.4)
        amp = amplitude * rng.normal(size=3)
        r = np.sqrt(sum((x - ci) ** 2 for x, ci in zip(grid.coords, c)))
        prof = smooth_bump(r / rad)
        pot += amp[:, None, None, None] * prof
    return curl(vector(grid, list(pot)))
