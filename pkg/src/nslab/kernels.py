"""Grid reductions with a compiled backend and a numpy fallback.

``BACKEND`` is ``"cython"`` when the extension imported, else ``"python"``.
Set ``NSLAB_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import math
import os

import numpy as np

from .grid import GridSpec

if os.environ.get("NSLAB_PURE_PYTHON") == "1":
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _kernels_py as _impl

        BACKEND = "python"


def use_backend(name: str) -> None:
    """Switch backend at runtime (benchmarks and parity tests)."""
    global _impl, BACKEND
    if name == "python":
        from . import _kernels_py as mod
    elif name == "cython":
        from . import _kernels as mod  # type: ignore[attr-defined]
    else:
        raise ValueError(name)
    _impl, BACKEND = mod, name


def available_backends() -> list[str]:
    out = ["python"]
    try:
        from . import _kernels  # noqa: F401  # type: ignore[attr-defined]

        out.append("cython")
    except ImportError:
        pass
    return out


def axis_offsets(grid: GridSpec, center) -> tuple[list[np.ndarray], tuple[int, ...]]:
    """Per-axis squared minimum-image distances to ``center`` and the nearest cell.

    Distances are formed in index units so that shifting the center by a
    whole number of cells permutes the values exactly.
    """
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.dims,))
    n, h = grid.n, grid.h
    idx = np.arange(n, dtype=float)
    d2, nearest = [], []
    for c in center:
        ci = (c + grid.half_width) / h
        di = idx - ci
        di -= n * np.round(di / n)
        d2.append(np.ascontiguousarray((di * h) ** 2))
        nearest.append(int(np.round(ci)) % n)
    return d2, tuple(nearest)


def singular_cell_weight(grid: GridSpec, expo: float) -> float:
    """Mean of |y|^expo over the ball with the volume of one cell.

    Finite only for expo > -dims.
    """
    d = grid.dims
    if expo <= -d:
        raise ValueError(f"|y|^{expo} is not integrable at the origin in {d}D")
    unit = math.pi if d == 2 else 4.0 * math.pi / 3.0
    radius = (grid.cell_volume / unit) ** (1.0 / d)
    return d * radius**expo / (expo + d)


def weighted_sum(grid: GridSpec, f: np.ndarray, center, mu: float, expo: float) -> float:
    """Sum over cells of (mu + |x - center|^2)^(expo/2) * f (no cell volume).

    For negative exponents the cell nearest the center uses
    ``min(point weight, singular_cell_weight)``; this is finite at mu = 0
    and keeps the sum monotone in mu.
    """
    if mu < 0:
        raise ValueError("regularizer mu must be >= 0")
    f = np.ascontiguousarray(f, dtype=float)
    d2, near = axis_offsets(grid, center)
    if expo < 0:
        if expo > -grid.dims:
            cap = singular_cell_weight(grid, expo)
        elif mu > 0:
            cap = math.inf
        else:
            raise ValueError(f"weight exponent {expo} is not integrable at mu = 0")
    else:
        cap = math.inf
    if grid.dims == 3:
        return _impl.wsum3(f, d2[0], d2[1], d2[2], float(mu), float(expo), *near, cap)
    return _impl.wsum2(f, d2[0], d2[1], float(mu), float(expo), *near, cap)


def ball_sum(grid: GridSpec, f: np.ndarray, center, radius: float) -> float:
    """Sum of f over cells whose sample point lies in the open ball B(center, radius)."""
    f = np.ascontiguousarray(f, dtype=float)
    d2, _ = axis_offsets(grid, center)
    r2 = float(radius) ** 2
    if grid.dims == 3:
        return _impl.bsum3(f, d2[0], d2[1], d2[2], r2)
    return _impl.bsum2(f, d2[0], d2[1], r2)


def weight_array(grid: GridSpec, center, mu: float, expo: float) -> np.ndarray:
    """Dense weight array matching ``weighted_sum`` (for pointwise uses)."""
    d2, near = axis_offsets(grid, center)
    s = float(mu) + sum(np.reshape(a, [-1 if i == ax else 1 for i in range(grid.dims)])
                        for ax, a in enumerate(d2))
    with np.errstate(divide="ignore"):
        w = np.asarray(s, dtype=float) ** (0.5 * expo) if expo != 0 else np.ones(grid.shape)
    if expo < 0 and expo > -grid.dims:
        w[near] = min(w[near], singular_cell_weight(grid, expo))
    return w
