# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pointwise transport kernels; same contracts as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def advect_grid(const double[:, :, ::1] phi, const double[:, :, :, ::1] grad):
    cdef Py_ssize_t B = grad.shape[0], P = grad.shape[3]
    cdef Py_ssize_t b, l, p
    out = np.empty((B, 2, P))
    cdef double[:, :, ::1] o = out
    with nogil:
        for b in range(B):
            for l in range(2):
                for p in range(P):
                    o[b, l, p] = phi[b, 0, p] * grad[b, l, 0, p] + phi[b, 1, p] * grad[b, l, 1, p]
    return out


def stretch_grid(const double[:, :, ::1] f, const double[:, :, ::1] gxi):
    cdef Py_ssize_t B = f.shape[0], P = f.shape[2]
    cdef Py_ssize_t b, l, p
    out = np.empty((B, 2, P))
    cdef double[:, :, ::1] o = out
    with nogil:
        for b in range(B):
            for l in range(2):
                for p in range(P):
                    o[b, l, p] = f[b, 0, p] * gxi[0, l, p] + f[b, 1, p] * gxi[1, l, p]
    return out


def salt_grid(const double[:, ::1] xi, const double[:, :, ::1] gxi,
              const double[:, :, ::1] f, const double[:, :, :, ::1] grad):
    cdef Py_ssize_t B = f.shape[0], P = f.shape[2]
    cdef Py_ssize_t b, l, p
    cdef double acc
    out = np.empty((B, 2, P))
    cdef double[:, :, ::1] o = out
    with nogil:
        for b in range(B):
            for l in range(2):
                for p in range(P):
                    acc = xi[0, p] * grad[b, l, 0, p] + xi[1, p] * grad[b, l, 1, p]
                    acc = acc + f[b, 0, p] * gxi[0, l, p]
                    acc = acc + f[b, 1, p] * gxi[1, l, p]
                    o[b, l, p] = acc
    return out
