# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Ginzburg-Landau kernels over batches of fields.

Fields are stored as contiguous (n_fields, n_vertices, 2) arrays.  The
Dirichlet term is a loop over DEC edges with weights star1; the potential
term is mass-lumped on vertices.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, tanh

cnp.import_array()

cdef double OUTER_SLOPE = 6.0
cdef double OUTER_BASE = 2.25


cdef inline void _potential(double x, double y, double* W, double* gx, double* gy) noexcept nogil:
    cdef double r2 = x * x + y * y
    cdef double r, t, s
    if r2 < 4.0:
        s = 1.0 - r2
        W[0] = 0.25 * s * s
        gx[0] = -s * x
        gy[0] = -s * y
    else:
        r = sqrt(r2)
        t = tanh(r - 2.0)
        W[0] = OUTER_BASE + OUTER_SLOPE * t
        s = OUTER_SLOPE * (1.0 - t * t) / r
        gx[0] = s * x
        gy[0] = s * y


def energy_grad(const double[:, :, ::1] U, const long[::1] tail, const long[::1] head,
                const double[::1] weight, const double[::1] mass, double inv_eps2):
    """Dirichlet energy, potential energy and gradient for every field."""
    cdef Py_ssize_t nf = U.shape[0], nv = U.shape[1], ne = tail.shape[0]
    cdef Py_ssize_t f, e, v, i, j
    cdef double dx, dy, w, ed, ep, W, gx, gy, c
    Ed_arr = np.zeros(nf)
    Ep_arr = np.zeros(nf)
    G_arr = np.zeros((nf, nv, 2))
    cdef double[::1] Ed = Ed_arr
    cdef double[::1] Ep = Ep_arr
    cdef double[:, :, ::1] G = G_arr
    with nogil:
        for f in range(nf):
            ed = 0.0
            for e in range(ne):
                i = tail[e]
                j = head[e]
                w = weight[e]
                dx = U[f, j, 0] - U[f, i, 0]
                dy = U[f, j, 1] - U[f, i, 1]
                ed += w * (dx * dx + dy * dy)
                G[f, i, 0] -= w * dx
                G[f, i, 1] -= w * dy
                G[f, j, 0] += w * dx
                G[f, j, 1] += w * dy
            ep = 0.0
            for v in range(nv):
                _potential(U[f, v, 0], U[f, v, 1], &W, &gx, &gy)
                c = mass[v] * inv_eps2
                ep += c * W
                G[f, v, 0] += c * gx
                G[f, v, 1] += c * gy
            Ed[f] = 0.5 * ed
            Ep[f] = ep
    return Ed_arr, Ep_arr, G_arr


def energy(const double[:, :, ::1] U, const long[::1] tail, const long[::1] head,
           const double[::1] weight, const double[::1] mass, double inv_eps2):
    cdef Py_ssize_t nf = U.shape[0], nv = U.shape[1], ne = tail.shape[0]
    cdef Py_ssize_t f, e, v, i, j
    cdef double dx, dy, ed, ep, W, gx, gy
    Ed_arr = np.zeros(nf)
    Ep_arr = np.zeros(nf)
    cdef double[::1] Ed = Ed_arr
    cdef double[::1] Ep = Ep_arr
    with nogil:
        for f in range(nf):
            ed = 0.0
            for e in range(ne):
                i = tail[e]
                j = head[e]
                dx = U[f, j, 0] - U[f, i, 0]
                dy = U[f, j, 1] - U[f, i, 1]
                ed += weight[e] * (dx * dx + dy * dy)
            ep = 0.0
            for v in range(nv):
                _potential(U[f, v, 0], U[f, v, 1], &W, &gx, &gy)
                ep += mass[v] * W
            Ed[f] = 0.5 * ed
            Ep[f] = ep * inv_eps2
    return Ed_arr, Ep_arr


def truncate(double[:, :, ::1] U):
    """Nearest-point retraction onto the closed unit disk, in place."""
    cdef Py_ssize_t nf = U.shape[0], nv = U.shape[1], f, v
    cdef double r2, s
    with nogil:
        for f in range(nf):
            for v in range(nv):
                r2 = U[f, v, 0] * U[f, v, 0] + U[f, v, 1] * U[f, v, 1]
                if r2 > 1.0:
                    s = 1.0 / sqrt(r2)
                    U[f, v, 0] *= s
                    U[f, v, 1] *= s
