# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled dual-Lorentzian kernels; same contract as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

NPARAM = 7


def dual_lorentzian(nu, p):
    cdef double[::1] x = np.ascontiguousarray(nu, dtype=np.float64)
    cdef double q[7]
    _load(p, q)
    cdef Py_ssize_t n = x.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double gp2 = q[4] * q[4], gm2 = q[5] * q[5], xp, xm
    for i in range(n):
        xp = x[i] - q[0]
        xm = x[i] - q[1]
        o[i] = q[6] - q[2] * gp2 / (xp * xp + gp2) - q[3] * gm2 / (xm * xm + gm2)
    return out


cdef inline void _row(double nu, const double* q, double* j, double* f) noexcept nogil:
    cdef double xp = nu - q[0], xm = nu - q[1]
    cdef double gp2 = q[4] * q[4], gm2 = q[5] * q[5]
    cdef double ip = 1.0 / (xp * xp + gp2), im = 1.0 / (xm * xm + gm2)
    j[2] = -gp2 * ip
    j[3] = -gm2 * im
    # reuse the shape factors: d/dnu_k and d/dgamma_k share 2 depth x / den^2
    j[0] = 2.0 * q[2] * xp * ip * j[2]
    j[1] = 2.0 * q[3] * xm * im * j[3]
    j[4] = -2.0 * q[2] * q[4] * xp * xp * ip * ip
    j[5] = -2.0 * q[3] * q[5] * xm * xm * im * im
    j[6] = 1.0
    f[0] = q[6] + q[2] * j[2] + q[3] * j[3]


cdef void _load(p, double* q) except *:
    cdef double[::1] v = np.ascontiguousarray(p, dtype=np.float64)
    cdef int k
    if v.shape[0] != NPARAM:
        raise ValueError(f"expected {NPARAM} parameters, got {v.shape[0]}")
    for k in range(NPARAM):
        q[k] = v[k]


def jacobian(nu, w, p):
    cdef double[::1] x = np.ascontiguousarray(nu, dtype=np.float64)
    cdef double[::1] wt = np.ascontiguousarray(w, dtype=np.float64)
    cdef double q[7]
    _load(p, q)
    cdef Py_ssize_t n = x.shape[0], i, k
    out = np.empty((n, 7))
    cdef double[:, ::1] o = out
    cdef double j[7]
    cdef double f
    with nogil:
        for i in range(n):
            _row(x[i], q, j, &f)
            for k in range(7):
                o[i, k] = wt[i] * j[k]
    return out


def normal_equations(nu, y, w, p):
    cdef double[::1] x = np.ascontiguousarray(nu, dtype=np.float64)
    cdef double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] wt = np.ascontiguousarray(w, dtype=np.float64)
    cdef double q[7]
    _load(p, q)
    cdef Py_ssize_t n = x.shape[0], i
    cdef int a, b, m
    # packed upper triangle of J^T J (28 entries) and J^T r, kept in C arrays
    cdef double acc[28]
    cdef double g[7]
    cdef double j[7]
    cdef double f, r, cost = 0.0
    for a in range(28):
        acc[a] = 0.0
    for a in range(7):
        g[a] = 0.0
    with nogil:
        for i in range(n):
            _row(x[i], q, j, &f)
            r = wt[i] * (yy[i] - f)
            cost += r * r
            m = 0
            for a in range(7):
                j[a] *= wt[i]
                g[a] += j[a] * r
            for a in range(7):
                for b in range(a, 7):
                    acc[m] += j[a] * j[b]
                    m += 1
    jtj = np.empty((7, 7))
    jtr = np.empty(7)
    m = 0
    for a in range(7):
        jtr[a] = g[a]
        for b in range(a, 7):
            jtj[a, b] = acc[m]
            jtj[b, a] = acc[m]
            m += 1
    return cost, jtj, jtr
