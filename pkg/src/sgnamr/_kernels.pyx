# cython: boundscheck=False, wraparound=False, cdivision=False
"""Compiled kernels for the sparse-solver inner loops.

The matvec accumulates each row left to right (ascending column index), the
same order as the pure-python fallback, so the two backends agree bit for bit.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def csr_matvec(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
               const double[::1] data, const double[::1] x, out=None):
    """y = A @ x for a CSR matrix with column-sorted rows."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    y = out if out is not None else np.empty(n)
    cdef double[::1] yv = y
    cdef Py_ssize_t i, idx
    cdef double acc
    for i in range(n):
        acc = 0.0
        for idx in range(indptr[i], indptr[i + 1]):
            acc += data[idx] * x[indices[idx]]
        yv[i] = acc
    return y


def ilu0_factor(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                double[::1] data, const cnp.int64_t[::1] diag_ptr):
    """In-place ILU(0); returns -1 on success or the zero-pivot row index."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef cnp.int64_t[::1] pos = np.full(n, -1, dtype=np.int64)
    cdef Py_ssize_t i, idx, kidx, k, p
    cdef double pivot, lik
    for i in range(n):
        for idx in range(indptr[i], indptr[i + 1]):
            pos[indices[idx]] = idx
        for idx in range(indptr[i], diag_ptr[i]):
            k = indices[idx]
            pivot = data[diag_ptr[k]]
            if pivot == 0.0:
                return k
            lik = data[idx] / pivot
            data[idx] = lik
            for kidx in range(diag_ptr[k] + 1, indptr[k + 1]):
                p = pos[indices[kidx]]
                if p >= 0:
                    data[p] -= lik * data[kidx]
        for idx in range(indptr[i], indptr[i + 1]):
            pos[indices[idx]] = -1
        if data[diag_ptr[i]] == 0.0:
            return i
    return -1


def ilu0_solve(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
               const double[::1] data, const cnp.int64_t[::1] diag_ptr,
               const double[::1] b, out=None):
    """Solve L U x = b for factors produced by ``ilu0_factor``."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    x = out if out is not None else np.empty(n)
    cdef double[::1] xv = x
    cdef Py_ssize_t i, idx
    cdef double acc
    for i in range(n):
        acc = b[i]
        for idx in range(indptr[i], diag_ptr[i]):
            acc -= data[idx] * xv[indices[idx]]
        xv[i] = acc
    for i in range(n - 1, -1, -1):
        acc = xv[i]
        for idx in range(diag_ptr[i] + 1, indptr[i + 1]):
            acc -= data[idx] * xv[indices[idx]]
        xv[i] = acc / data[diag_ptr[i]]
    return x
