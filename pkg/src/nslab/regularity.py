"""CKN-type regularity diagnostics on stored trajectories.

Scores are ``(1/r) int int_{Q*_r} |grad u|^2`` with ball membership by
sample point and time integrals of the piecewise-linear interpolant of
the per-snapshot integrand. The r -> 0 limsup is represented by the
smallest radius of the supplied ladder.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .norms import (cumulative_trapezoid, lp_norm, sigma, weighted_enstrophy_series,
                    window_integral)


@dataclass(frozen=True)
class ParabolicCylinder:
    """Q_r(t, x) = (t - r^2, t) x B(x, r); Q*_r is Q_r shifted up by r^2/8."""
    t: float
    x: tuple[float, ...]
    r: float
    variant: str = "Qstar"

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("radius must be positive")
        if self.variant not in ("Q", "Qstar"):
            raise ValueError("variant is 'Q' or 'Qstar'")

    @property
    def window(self) -> tuple[float, float]:
        r2 = self.r * self.r
        if self.variant == "Q":
            return self.t - r2, self.t
        return self.t - 7.0 * r2 / 8.0, self.t + r2 / 8.0


@dataclass(frozen=True)
class Paraboloid:
    """Region t > |x - vertex|^2 / alpha."""
    alpha: float
    vertex: tuple[float, ...] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("aperture must be positive")

    def contains(self, t: float, x) -> bool:
        d = np.asarray(x, dtype=float) - np.asarray(self.vertex, dtype=float)
        return bool(t > float(d @ d) / self.alpha)


# ---------------------------------------------------------------------------
# scores

def ball_dissipation_series(traj, x, r: float) -> np.ndarray:
    g = traj.grid
    return np.array([kernels.ball_sum(g, traj.grad_sq(i), x, r) * g.cell_volume
                     for i in range(len(traj.times))])


def _check_radius(traj, r: float) -> None:
    if r < 2 * traj.grid.h * (1 - 1e-12):
        raise ValueError(f"radius {r} is below two grid cells ({2 * traj.grid.h})")


def ckn_quantity(traj, t: float, x, r: float, variant: str = "Qstar") -> float:
    """(1/r) int int over the cylinder of |grad u|^2."""
    _check_radius(traj, r)
    cyl = ParabolicCylinder(t, tuple(np.atleast_1d(x)), r, variant)
    a, b = cyl.window
    span = (traj.times[0], traj.times[-1])
    tol = 1e-12 * max(1.0, abs(span[1]))
    if a < span[0] - tol or b > span[1] + tol:
        raise ValueError(f"cylinder time window [{a:g}, {b:g}] leaves the trajectory span {span}")
    return window_integral(traj.times, ball_dissipation_series(traj, x, r), a, b) / r


@dataclass
class ScanResult:
    radii: list[float]
    scores: list[float]
    eps_star: float

    @property
    def verdict(self) -> bool:
        return self.scores[-1] < self.eps_star


def ckn_scan(traj, t: float, x, radii: Sequence[float], eps_star: float = 0.05) -> ScanResult:
    radii = [float(r) for r in radii]
    if not radii or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be a nonempty strictly decreasing list")
    return ScanResult(radii, [ckn_quantity(traj, t, x, r) for r in radii], eps_star)


# ---------------------------------------------------------------------------
# regular-set maps

def aperture_ladder(k_max: int = 10, k_min: int = 0) -> list[float]:
    """Geometric ladder 2^-k, largest first."""
    return [2.0**-k for k in range(k_min, k_max + 1)]


@dataclass
class RegularityMap:
    points: list[tuple[float, tuple[float, ...]]]
    radii: list[float]
    scores: np.ndarray  # (points, radii)
    eps_star: float
    apertures: list[float]
    vertex: tuple[float, ...]
    alpha_hat: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def verdicts(self) -> np.ndarray:
        return self.scores[:, -1] < self.eps_star

    def verdicts_at(self, eps_star: float) -> np.ndarray:
        return self.scores[:, -1] < eps_star

    def fit_alpha(self, eps_star: float | None = None) -> float:
        """Largest ladder aperture whose paraboloid holds only passing points (0 if none)."""
        ok = self.verdicts if eps_star is None else self.verdicts_at(eps_star)
        for a in sorted(self.apertures, reverse=True):
            par = Paraboloid(a, self.vertex)
            inside = [par.contains(t, x) for t, x in self.points]
            if all(o for o, i in zip(ok, inside) if i):
                return a
        return 0.0

    def to_csv(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x1", "x2", "x3", "r", "score", "pass"])
        for (t, x), row in zip(self.points, self.scores):
            xs = list(x) + [0.0] * (3 - len(x))
            passed = int(row[-1] < self.eps_star)
            for r, s in zip(self.radii, row):
                w.writerow([f"{t:.12g}", *(f"{c:.12g}" for c in xs), f"{r:.12g}", f"{s:.12e}", passed])
        spacing = 2.0
        buf.write(f"# alpha_hat={self.alpha_hat:.12g} ladder_factor={spacing:g} eps_star={self.eps_star:g}\n")
        return buf.getvalue()


def default_lattice(traj, vertex, radii: Sequence[float], n_times: int = 4,
                    offsets: Sequence[float] = (0.0, 0.25, 0.5)) -> list[tuple[float, tuple[float, ...]]]:
    """Points (t, vertex + o e_1) with cylinder windows inside the span."""
    rmax = max(radii)
    lo = traj.times[0] + 7.0 * rmax**2 / 8.0
    hi = traj.times[-1] - rmax**2 / 8.0
    if hi <= lo:
        raise ValueError("trajectory too short for the largest radius")
    ts = np.linspace(lo, hi, n_times)
    v = np.asarray(vertex, dtype=float)
    pts = []
    for t in ts:
        for o in offsets:
            x = v.copy()
            x[0] += o
            pts.append((float(t), tuple(float(c) for c in x)))
    return pts


def map_regular_set(traj, vertex, lattice, radii: Sequence[float], eps_star: float = 0.05,
                    apertures: Sequence[float] | None = None) -> RegularityMap:
    lattice = list(lattice)
    if not lattice:
        raise ValueError("empty sample lattice")
    radii = [float(r) for r in radii]
    apertures = list(apertures) if apertures is not None else aperture_ladder()
    scores = np.array([ckn_scan(traj, t, x, radii, eps_star).scores for t, x in lattice])
    vert = tuple(float(c) for c in np.atleast_1d(vertex))
    m = RegularityMap([(float(t), tuple(x)) for t, x in lattice], radii, scores, eps_star,
                      apertures, vert)
    m.alpha_hat = m.fit_alpha()
    return m


# ---------------------------------------------------------------------------
# Galilean segment

@dataclass
class SegmentResult:
    mus: list[float]
    values: list[float]
    singular_value: float
    extrapolated: float

    @property
    def monotone(self) -> bool:
        order = np.argsort(self.mus)[::-1]  # decreasing mu
        v = np.asarray(self.values)[order]
        return bool(np.all(np.diff(v) >= -1e-12 * max(1.0, np.max(np.abs(v)))))


def _check_segment(traj, xi, T: float, center) -> None:
    g = traj.grid
    end = np.asarray(center, float) + T * np.asarray(xi, float)
    if np.any(np.abs(end) >= g.half_width) or np.any(np.abs(np.asarray(center, float)) >= g.half_width):
        raise ValueError("moving center leaves the box")


def segment_diagnostic(traj, xi, T: float, mus: Sequence[float],
                       center=(0.0, 0.0, 0.0)) -> SegmentResult:
    """int_0^T int sigma_mu(x - center - xi tau) |grad v|^2 for each mu, plus mu = 0."""
    _check_segment(traj, xi, T, center)
    mus = [float(m) for m in mus]
    if any(m <= 0 for m in mus):
        raise ValueError("mu-sequence must be positive; mu = 0 is always reported")
    vals = [window_integral(traj.times, weighted_enstrophy_series(traj, sigma(center, m, xi)), 0.0, T)
            for m in mus]
    sing = window_integral(traj.times, weighted_enstrophy_series(traj, sigma(center, 0.0, xi)), 0.0, T)
    if len(mus) >= 2:
        order = np.argsort(mus)
        m1, m2 = mus[order[0]], mus[order[1]]
        v1, v2 = vals[order[0]], vals[order[1]]
        lin = v1 + (v1 - v2) * m1 / (m2 - m1)
        extra = min(max(lin, v1), sing)
    else:
        extra = min(vals[0], sing) if vals else sing
    return SegmentResult(mus, vals, sing, extra)


def cylinder_segment_bound(traj, xi, s: float, r: float, center=(0.0, 0.0, 0.0)) -> tuple[float, float]:
    """(lhs, rhs): lhs = (1/r) int int_{Q*_r(s, c + xi s)} |grad v|^2,
    rhs = 2 int over the same window of int |grad v|^2 / |x - c - xi tau|."""
    xi = np.asarray(xi, dtype=float)
    if np.linalg.norm(xi) * r > 1 + 1e-12:
        raise ValueError("need |xi| r <= 1")
    c = np.asarray(center, dtype=float)
    lhs = ckn_quantity(traj, s, c + xi * s, r)
    a, b = ParabolicCylinder(s, tuple(c), r).window
    dens = weighted_enstrophy_series(traj, sigma(center, 0.0, xi))
    return lhs, 2.0 * window_integral(traj.times, dens, a, b)


# ---------------------------------------------------------------------------
# changeover time

@dataclass
class TStarResult:
    t_star: float
    index: int
    times: np.ndarray
    dissipation: np.ndarray  # cumulative B_mu
    reference: np.ndarray    # cumulative int ||w||^r_{L^q}
    mode: str = "crossing"

    @property
    def bracket_ok(self) -> bool:
        i = self.index
        ok = self.dissipation[i] <= self.reference[i] * (1 + 1e-12) + 1e-300
        if self.mode == "crossing" and i + 1 < len(self.times):
            ok = ok and self.dissipation[i + 1] > self.reference[i + 1]
        return bool(ok)


def t_star(v_traj, w_traj, xi, mu: float, rq: tuple[float, float], center=(0.0, 0.0, 0.0)) -> TStarResult:
    """Last snapshot with B_mu(t) <= int_0^t ||w||^r_{L^q} (sup of the set); t_end if never exceeded."""
    from .norms import is_admissible

    r, q = rq
    if not is_admissible(r, q):
        raise ValueError(f"({r}, {q}) is not an admissible couple")
    if len(v_traj.times) != len(w_traj.times) or not np.allclose(v_traj.times, w_traj.times, rtol=0, atol=1e-12):
        raise ValueError("v and w trajectories use different time lattices")
    if v_traj.grid != w_traj.grid:
        raise ValueError("v and w trajectories use different grids")
    ts = v_traj.times
    B = cumulative_trapezoid(ts, weighted_enstrophy_series(v_traj, sigma(center, mu, xi)))
    R = cumulative_trapezoid(ts, np.array([lp_norm(s, q) ** r for s in w_traj.snapshots]))
    ok = np.nonzero(B <= R)[0]
    i = int(ok[-1]) if len(ok) else 0
    return TStarResult(float(ts[i]), i, ts, B, R)


def t_star_gamma(v_traj, xi, mu: float, M: float, T: float, center=(0.0, 0.0, 0.0)) -> TStarResult:
    """inf{s in (0, T] : int_s^{s + T/M} int sigma_mu |grad v_xi|^2 > M}, or T if empty.

    Windows running past the stored span are truncated at its end.
    """
    if M <= 1:
        raise ValueError("M must exceed 1")
    ts = v_traj.times
    if T > ts[-1] + 1e-12:
        raise ValueError("T exceeds the trajectory span")
    dens = weighted_enstrophy_series(v_traj, sigma(center, mu, xi))
    B = cumulative_trapezoid(ts, dens)
    hit = None
    for i, s in enumerate(ts):
        if s <= 0 or s > T + 1e-12:
            continue
        if window_integral(ts, dens, s, min(s + T / M, ts[-1])) > M:
            hit = i
            break
    i = hit if hit is not None else int(np.argmin(np.abs(ts - T)))
    return TStarResult(float(ts[i]), i, ts, B, np.full(len(ts), M * (M + 1.0)), mode="gamma")
