# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled reductions over periodic grids.

Weights are evaluated on the fly from per-axis squared distances, so no
N^d weight array is ever allocated.
"""
from libc.math cimport sqrt, pow, fmin

cdef inline double _w(double s, double expo) nogil:
    # s = mu + |y|^2
    if expo == -1.0:
        return 1.0 / sqrt(s)
    if expo == -2.0:
        return 1.0 / s
    if expo == 0.0:
        return 1.0
    return pow(s, 0.5 * expo)


def wsum3(const double[:, :, ::1] f, const double[::1] dx2, const double[::1] dy2,
          const double[::1] dz2, double mu, double expo,
          Py_ssize_t ni, Py_ssize_t nj, Py_ssize_t nk, double cap):
    cdef Py_ssize_t i, j, k
    cdef Py_ssize_t n0 = f.shape[0], n1 = f.shape[1], n2 = f.shape[2]
    cdef double total = 0.0, row, sij, w
    with nogil:
        for i in range(n0):
            for j in range(n1):
                sij = mu + dx2[i] + dy2[j]
                row = 0.0
                if i == ni and j == nj:
                    for k in range(n2):
                        w = _w(sij + dz2[k], expo)
                        if k == nk:
                            w = fmin(w, cap)
                        row += w * f[i, j, k]
                else:
                    for k in range(n2):
                        row += _w(sij + dz2[k], expo) * f[i, j, k]
                total += row
    return total


def wsum2(const double[:, ::1] f, const double[::1] dx2, const double[::1] dy2,
          double mu, double expo, Py_ssize_t ni, Py_ssize_t nj, double cap):
    cdef Py_ssize_t i, j
    cdef Py_ssize_t n0 = f.shape[0], n1 = f.shape[1]
    cdef double total = 0.0, row, w
    with nogil:
        for i in range(n0):
            row = 0.0
            for j in range(n1):
                w = _w(mu + dx2[i] + dy2[j], expo)
                if i == ni and j == nj:
                    w = fmin(w, cap)
                row += w * f[i, j]
            total += row
    return total


def bsum3(const double[:, :, ::1] f, const double[::1] dx2, const double[::1] dy2,
          const double[::1] dz2, double r2):
    cdef Py_ssize_t i, j, k
    cdef double total = 0.0, row, sij
    with nogil:
        for i in range(f.shape[0]):
            if dx2[i] >= r2:
                continue
            for j in range(f.shape[1]):
                sij = dx2[i] + dy2[j]
                if sij >= r2:
                    continue
                row = 0.0
                for k in range(f.shape[2]):
                    if sij + dz2[k] < r2:
                        row += f[i, j, k]
                total += row
    return total


def bsum2(const double[:, ::1] f, const double[::1] dx2, const double[::1] dy2, double r2):
    cdef Py_ssize_t i, j
    cdef double total = 0.0, row
    with nogil:
        for i in range(f.shape[0]):
            row = 0.0
            for j in range(f.shape[1]):
                if dx2[i] + dy2[j] < r2:
                    row += f[i, j]
            total += row
    return total
