# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot numerical kernels (see ``_pykernels.py``)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()

cdef int SE = 0
cdef int MATERN52 = 1
cdef double SQRT5 = 2.23606797749979


def ard_gram(X1, X2, lengthscales, double amplitude, int family, int n_fid):
    cdef double[:, ::1] A = np.ascontiguousarray(X1, dtype=np.float64)
    cdef double[:, ::1] B = np.ascontiguousarray(X2, dtype=np.float64)
    cdef double[::1] ls = np.ascontiguousarray(lengthscales, dtype=np.float64)
    cdef Py_ssize_t n1 = A.shape[0], n2 = B.shape[0], d = A.shape[1]
    cdef Py_ssize_t nb = d if family == SE else d - n_fid
    out = np.empty((n1, n2), dtype=np.float64)
    cdef double[:, ::1] K = out
    cdef Py_ssize_t i, j, k
    cdef double t, r2b, r2f, r
    with nogil:
        for i in range(n1):
            for j in range(n2):
                r2b = 0.0
                r2f = 0.0
                for k in range(d):
                    t = (A[i, k] - B[j, k]) / ls[k]
                    if k < nb:
                        r2b = r2b + t * t
                    else:
                        r2f = r2f + t * t
                if family == SE:
                    K[i, j] = amplitude * exp(-0.5 * r2b)
                else:
                    r = sqrt(r2b)
                    K[i, j] = amplitude * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2b) * exp(-SQRT5 * r - 0.5 * r2f)
    return out


def ard_gram_grad(X, lengthscales, double amplitude, int family, int n_fid):
    cdef double[:, ::1] A = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] ls = np.ascontiguousarray(lengthscales, dtype=np.float64)
    cdef Py_ssize_t n = A.shape[0], d = A.shape[1]
    cdef Py_ssize_t nb = d if family == SE else d - n_fid
    Kout = np.empty((n, n), dtype=np.float64)
    dKout = np.empty((d, n, n), dtype=np.float64)
    cdef double[:, ::1] K = Kout
    cdef double[:, :, ::1] dK = dKout
    cdef Py_ssize_t i, j, k
    cdef double t, r2b, r2f, r, e, kij, base
    with nogil:
        for i in range(n):
            for j in range(i + 1):
                r2b = 0.0
                r2f = 0.0
                for k in range(d):
                    t = (A[i, k] - A[j, k]) / ls[k]
                    if k < nb:
                        r2b = r2b + t * t
                    else:
                        r2f = r2f + t * t
                if family == SE:
                    kij = amplitude * exp(-0.5 * r2b)
                    base = kij
                else:
                    r = sqrt(r2b)
                    e = exp(-SQRT5 * r - 0.5 * r2f)
                    kij = amplitude * (1.0 + SQRT5 * r + (5.0 / 3.0) * r2b) * e
                    base = amplitude * (5.0 / 3.0) * (1.0 + SQRT5 * r) * e
                K[i, j] = kij
                K[j, i] = kij
                for k in range(d):
                    t = (A[i, k] - A[j, k]) / ls[k]
                    if k < nb:
                        t = base * t * t
                    else:
                        t = kij * t * t
                    dK[k, i, j] = t
                    dK[k, j, i] = t
    return Kout, dKout


def deflate(R, q):
    cdef double[:, ::1] M = R
    cdef double[::1] v = np.ascontiguousarray(q, dtype=np.float64)
    cdef Py_ssize_t n = M.shape[0], m = M.shape[1]
    norms = np.empty(n, dtype=np.float64)
    cdef double[::1] nv = norms
    cdef Py_ssize_t i, k
    cdef double c, s
    with nogil:
        for i in range(n):
            c = 0.0
            for k in range(m):
                c = c + M[i, k] * v[k]
            s = 0.0
            for k in range(m):
                M[i, k] = M[i, k] - c * v[k]
                s = s + M[i, k] * M[i, k]
            nv[i] = sqrt(s)
    return norms
