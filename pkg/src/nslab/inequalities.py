"""Ratio harness for the weighted interpolation and weighted Riesz bounds.

Weights are powers of sigma_mu = (mu + |x|^2)^(-1/2); sigma_mu^g is a
``WeightSpec`` with exponent -g. Ratios are reported, never compared
with a constant.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .fields import GaussianEnsembleSpec, random_smooth_field
from .grid import GridSpec, PhysicalField, gradient, riesz_transform, scalar
from .norms import WeightSpec, _frac, weighted_lp_norm


@dataclass(frozen=True)
class CKNParams:
    r: Fraction
    theta: Fraction
    gamma: Fraction
    alpha: Fraction
    beta: Fraction
    mu: float = 0.0

    @classmethod
    def of(cls, r, theta, gamma, alpha, beta, mu: float = 0.0) -> CKNParams:
        return cls(*(_frac(x) for x in (r, theta, gamma, alpha, beta)), mu)

    @classmethod
    def interpolation_family(cls, q) -> CKNParams:
        """2 theta = 1 + 3/q, r = 2q/(q-1), gamma = 1, alpha = beta = 1/2."""
        q = _frac(q)
        return cls(2 * q / (q - 1), (1 + 3 / q) / 2, Fraction(1), Fraction(1, 2), Fraction(1, 2))

    @classmethod
    def cubic(cls) -> CKNParams:
        return cls.of(3, Fraction(2, 3), Fraction(2, 3), Fraction(1, 2), Fraction(1, 2))


@dataclass(frozen=True)
class Validity:
    valid: bool
    failed: tuple[int, ...]


def ckn_params_valid(p: CKNParams) -> Validity:
    """Admissibility conditions checked in exact rational arithmetic.

    1: r > 0, 0 < theta <= 1, alpha, beta < 3/2, gamma < 3/r.
    2: the dimensional balance -gamma + 3/r = theta(1/2 - alpha) + (1 - theta)(3/2 - beta).
    3: theta alpha + (1 - theta) beta <= gamma.
    4: gamma <= theta(alpha + 1) + (1 - theta) beta when -gamma + 3/r = 1/2 - alpha.
    """
    r, th, g, a, b = (_frac(x) for x in (p.r, p.theta, p.gamma, p.alpha, p.beta))
    half, three_half = Fraction(1, 2), Fraction(3, 2)
    failed = []
    if not (r > 0 and 0 < th <= 1 and a < three_half and b < three_half and g < 3 / r):
        failed.append(1)
    if r > 0:
        lhs = -g + 3 / r
        if lhs != th * (-a + half) + (1 - th) * (-b + three_half):
            failed.append(2)
    if not th * a + (1 - th) * b <= g:
        failed.append(3)
    if r > 0 and -g + 3 / r == -a + half and not g <= th * (a + 1) + (1 - th) * b:
        failed.append(4)
    return Validity(not failed, tuple(failed))


def _sigma_pow(g, mu: float, center) -> WeightSpec:
    return WeightSpec(tuple(center), float(mu), None, -float(g))


def ckn_ratio(p: CKNParams, f: PhysicalField, mu: float, center=(0.0, 0.0, 0.0)) -> float | None:
    """||sigma^gamma f||_r / (||sigma^alpha grad f||_2^theta ||sigma^beta f||_2^(1-theta)); None for f = 0."""
    lhs = weighted_lp_norm(f, float(p.r), _sigma_pow(p.gamma, mu, center))
    grad = gradient(f)
    a = weighted_lp_norm(grad, 2, _sigma_pow(p.alpha, mu, center))
    b = weighted_lp_norm(f, 2, _sigma_pow(p.beta, mu, center))
    th = float(p.theta)
    den = a**th * b ** (1 - th)
    if den == 0:
        return None
    return lhs / den


@dataclass
class RatioTable:
    label: str
    rows: list[tuple[str, float, int, float]] = field(default_factory=list)  # (set, mu, seed, ratio)
    skipped: int = 0

    def max_by_mu(self) -> dict[float, float]:
        out: dict[float, float] = {}
        for _, mu, _, r in self.rows:
            out[mu] = max(out.get(mu, 0.0), r)
        return out

    @property
    def max_ratio(self) -> float:
        return max(r for *_, r in self.rows) if self.rows else 0.0

    @property
    def mu_variation(self) -> float:
        m = list(self.max_by_mu().values())
        return max(m) / min(m) if m and min(m) > 0 else float("inf")

    def argmax_seed(self) -> dict[float, int]:
        best: dict[float, tuple[float, int]] = {}
        for _, mu, seed, r in self.rows:
            if mu not in best or r > best[mu][0]:
                best[mu] = (r, seed)
        return {mu: s for mu, (_, s) in best.items()}

    def to_csv(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["param_set", "mu", "seed", "ratio"])
        for name, mu, seed, r in self.rows:
            w.writerow([name, f"{mu:.6g}", seed, f"{r:.17e}"])
        return buf.getvalue()


def ensemble(grid: GridSpec, seeds: Iterable[int], spec: GaussianEnsembleSpec | None = None,
             scale: float = 1.0) -> list[tuple[int, PhysicalField]]:
    return [(s, random_smooth_field(grid, s, spec, scale)) for s in seeds]


def verify_ckn_inequality(p: CKNParams, fields: Sequence[tuple[int, PhysicalField]],
                          mus: Sequence[float], label: str = "ckn",
                          center=(0.0, 0.0, 0.0)) -> RatioTable:
    v = ckn_params_valid(p)
    if not v.valid:
        raise ValueError(f"invalid parameters: conditions {v.failed} fail")
    table = RatioTable(label)
    for seed, f in fields:
        for mu in mus:
            r = ckn_ratio(p, f, mu, center)
            if r is None:
                table.skipped += 1
                continue
            table.rows.append((label, float(mu), int(seed), float(r)))
    return table


def stein_range(p: float) -> tuple[float, float]:
    return -3.0 + 3.0 / p, 3.0 / p


def random_scalar_field(grid: GridSpec, seed: int, spec: GaussianEnsembleSpec | None = None) -> PhysicalField:
    """Seeded band-limited scalar: divergence-free field's first component."""
    return scalar(grid, random_smooth_field(grid, seed, spec).values[0])


def stein_ratio(f: PhysicalField, i: int, j: int, p: float, a: float, mu: float,
                center=(0.0, 0.0, 0.0)) -> float | None:
    w = WeightSpec(tuple(center), float(mu), None, -float(a))
    tf = riesz_transform(i, riesz_transform(j, f))
    den = weighted_lp_norm(f, p, w)
    if den == 0:
        return None
    return weighted_lp_norm(tf, p, w) / den


def verify_stein_inequality(p: float, a: float, fields: Sequence[tuple[int, PhysicalField]],
                            mus: Sequence[float], pairs: Sequence[tuple[int, int]] | None = None,
                            center=(0.0, 0.0, 0.0)) -> dict[tuple[int, int], RatioTable]:
    """Per-(i, j) ratio tables for T = R_i R_j with weight sigma_mu^a."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    lo, hi = stein_range(p)
    if not lo < a < hi:
        raise ValueError(f"weight exponent {a} outside ({lo:g}, {hi:g})")
    if not fields:
        return {}
    d = fields[0][1].grid.dims
    pairs = pairs or [(i, j) for i in range(d) for j in range(i, d)]
    out = {}
    for i, j in pairs:
        table = RatioTable(f"stein_R{i + 1}R{j + 1}")
        for seed, f in fields:
            for mu in mus:
                r = stein_ratio(f, i, j, p, a, mu, center)
                if r is None:
                    table.skipped += 1
                    continue
                table.rows.append((table.label, float(mu), int(seed), float(r)))
        out[(i, j)] = table
    return out
