# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluation kernels (see pum._kernels_np for the reference
semantics and pum.backend for the selection logic)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()

GAUSSIAN = 0
MULTIQUADRIC = 1
INVERSE_QUADRATIC = 2


cdef inline double _sqdist(const double[:, ::1] A, const double[:, ::1] B,
                           Py_ssize_t i, Py_ssize_t k, Py_ssize_t d) nogil:
    cdef double s = 0.0, diff
    cdef Py_ssize_t j
    for j in range(d):
        diff = A[i, j] - B[k, j]
        s += diff * diff
    return s


def kernel_values(int family, double eps, const double[:, ::1] A,
                  const double[:, ::1] B):
    cdef Py_ssize_t m = A.shape[0], n = B.shape[0], d = A.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((m, n))
    cdef double[:, ::1] o = out
    cdef double e2 = eps * eps, t
    cdef Py_ssize_t i, k
    with nogil:
        for i in range(m):
            for k in range(n):
                t = e2 * _sqdist(A, B, i, k, d)
                if family == 0:
                    o[i, k] = exp(-t)
                elif family == 1:
                    o[i, k] = sqrt(1.0 + t)
                else:
                    o[i, k] = 1.0 / (1.0 + t)
    return out


def kernel_gradient(int family, double eps, const double[:, ::1] A,
                    const double[:, ::1] B):
    cdef Py_ssize_t m = A.shape[0], n = B.shape[0], d = A.shape[1]
    cdef cnp.ndarray[double, ndim=3] out = np.empty((d, m, n))
    cdef double[:, :, ::1] o = out
    cdef double e2 = eps * eps, t, two_gp, q
    cdef Py_ssize_t i, k, j
    with nogil:
        for i in range(m):
            for k in range(n):
                t = e2 * _sqdist(A, B, i, k, d)
                if family == 0:
                    two_gp = -2.0 * e2 * exp(-t)
                elif family == 1:
                    two_gp = e2 / sqrt(1.0 + t)
                else:
                    q = 1.0 + t
                    two_gp = -2.0 * e2 / (q * q)
                for j in range(d):
                    o[j, i, k] = two_gp * (A[i, j] - B[k, j])
    return out


def kernel_laplacian(int family, double eps, const double[:, ::1] A,
                     const double[:, ::1] B, int ndim):
    cdef Py_ssize_t m = A.shape[0], n = B.shape[0], d = A.shape[1]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((m, n))
    cdef double[:, ::1] o = out
    cdef double e2 = eps * eps, t, s, q
    cdef Py_ssize_t i, k
    with nogil:
        for i in range(m):
            for k in range(n):
                t = e2 * _sqdist(A, B, i, k, d)
                if family == 0:
                    o[i, k] = (4.0 * e2 * t - 2.0 * ndim * e2) * exp(-t)
                elif family == 1:
                    s = sqrt(1.0 + t)
                    o[i, k] = ndim * e2 / s - e2 * t / (s * s * s)
                else:
                    q = 1.0 + t
                    o[i, k] = (-2.0 * ndim * e2 / (q * q)
                               + 8.0 * e2 * t / (q * q * q))
    return out


def kernel_bundle(int family, double eps, const double[:, ::1] A,
                  const double[:, ::1] B, int ndim):
    """Fused values + gradient + laplacian (one distance/exp pass)."""
    cdef Py_ssize_t m = A.shape[0], n = B.shape[0], d = A.shape[1]
    cdef cnp.ndarray[double, ndim=2] K = np.empty((m, n))
    cdef cnp.ndarray[double, ndim=3] G = np.empty((d, m, n))
    cdef cnp.ndarray[double, ndim=2] L = np.empty((m, n))
    cdef double[:, ::1] k_ = K
    cdef double[:, :, ::1] g_ = G
    cdef double[:, ::1] l_ = L
    cdef double e2 = eps * eps, t, v, two_gp, q
    cdef Py_ssize_t i, k, j
    with nogil:
        for i in range(m):
            for k in range(n):
                t = e2 * _sqdist(A, B, i, k, d)
                if family == 0:
                    v = exp(-t)
                    k_[i, k] = v
                    two_gp = -2.0 * e2 * v
                    l_[i, k] = (4.0 * e2 * t - 2.0 * ndim * e2) * v
                elif family == 1:
                    v = sqrt(1.0 + t)
                    k_[i, k] = v
                    two_gp = e2 / v
                    l_[i, k] = ndim * e2 / v - e2 * t / (v * v * v)
                else:
                    q = 1.0 + t
                    v = 1.0 / q
                    k_[i, k] = v
                    two_gp = -2.0 * e2 * v * v
                    l_[i, k] = (-2.0 * ndim * e2 + 8.0 * e2 * t * v) * v * v
                for j in range(d):
                    g_[j, i, k] = two_gp * (A[i, j] - B[k, j])
    return K, G, L


def wendland_parts(const double[::1] r):
    cdef Py_ssize_t n = r.shape[0], i
    cdef cnp.ndarray[double, ndim=1] psi = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] g1 = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] d2 = np.empty(n)
    cdef double[::1] p = psi, g = g1, h = d2
    cdef double u, u2, u3
    with nogil:
        for i in range(n):
            u = 1.0 - r[i]
            if u < 0.0:
                u = 0.0
            u2 = u * u
            u3 = u2 * u
            p[i] = u3 * u * (4.0 * r[i] + 1.0)
            g[i] = -20.0 * u3
            h[i] = 20.0 * u2 * (4.0 * r[i] - 1.0)
    return psi, g1, d2
