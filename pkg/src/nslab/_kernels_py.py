"""Pure-numpy versions of the compiled reductions in ``_kernels.pyx``.

Same signatures and semantics; selected automatically when the extension
is not built or when ``NSLAB_PURE_PYTHON=1``.
"""
import numpy as np


def _weights(s, expo):
    with np.errstate(divide="ignore"):
        if expo == -1.0:
            return 1.0 / np.sqrt(s)
        if expo == -2.0:
            return 1.0 / s
        if expo == 0.0:
            return np.ones_like(s)
        return s ** (0.5 * expo)


def wsum3(f, dx2, dy2, dz2, mu, expo, ni, nj, nk, cap):
    w = _weights(mu + dx2[:, None, None] + dy2[None, :, None] + dz2[None, None, :], expo)
    w[ni, nj, nk] = min(w[ni, nj, nk], cap)
    return float(np.sum(w * f))


def wsum2(f, dx2, dy2, mu, expo, ni, nj, cap):
    w = _weights(mu + dx2[:, None] + dy2[None, :], expo)
    w[ni, nj] = min(w[ni, nj], cap)
    return float(np.sum(w * f))


def bsum3(f, dx2, dy2, dz2, r2):
    inside = (dx2[:, None, None] + dy2[None, :, None] + dz2[None, None, :]) < r2
    return float(np.sum(f[inside]))


def bsum2(f, dx2, dy2, r2):
    inside = (dx2[:, None] + dy2[None, :]) < r2
    return float(np.sum(f[inside]))
