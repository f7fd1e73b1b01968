"""Pure-python reference kernels for the sparse-solver inner loops.

These mirror the compiled kernels in ``_kernels.pyx``.  The matvec keeps the
same accumulation order (ascending column index within each row, one running
sum per row) so both backends produce bit-identical products.  numpy's own
segment reductions (``np.sum``, ``np.add.reduceat``) use pairwise or SIMD
partial sums and cannot be used here; instead the k-th entry of every row is
added in pass k, which performs the identical rounding sequence per row while
staying vectorized across rows.
"""

import numpy as np


def csr_matvec(indptr, indices, data, x, out=None):
    """y = A @ x for a CSR matrix with column-sorted rows."""
    n = indptr.shape[0] - 1
    y = out if out is not None else np.empty(n)
    y[:] = 0.0
    nnz_row = indptr[1:] - indptr[:-1]
    active = np.flatnonzero(nnz_row)
    starts = indptr[active]
    remaining = nnz_row[active]
    k = 0
    while active.size:
        idx = starts + k
        y[active] += data[idx] * x[indices[idx]]
        k += 1
        keep = remaining > k
        if not keep.all():
            active = active[keep]
            starts = starts[keep]
            remaining = remaining[keep]
    return y


def ilu0_factor(indptr, indices, data, diag_ptr):
    """In-place ILU(0) factorization of a CSR matrix.

    On return ``data`` holds the strict lower part of L (unit diagonal
    implied) and the upper part of U on the original sparsity pattern.
    Returns -1 on success, or the index of the row with a zero pivot.
    """
    n = indptr.shape[0] - 1
    pos = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        pos[indices[indptr[i]:indptr[i + 1]]] = np.arange(indptr[i], indptr[i + 1])
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
        pos[indices[indptr[i]:indptr[i + 1]]] = -1
        if data[diag_ptr[i]] == 0.0:
            return i
    return -1


def ilu0_solve(indptr, indices, data, diag_ptr, b, out=None):
    """Solve L U x = b for ILU(0) factors stored as by ``ilu0_factor``."""
    n = indptr.shape[0] - 1
    x = out if out is not None else np.empty(n)
    x[:] = b
    for i in range(n):
        lo, d = indptr[i], diag_ptr[i]
        if d > lo:
            x[i] -= np.dot(data[lo:d], x[indices[lo:d]])
    for i in range(n - 1, -1, -1):
        d, hi = diag_ptr[i], indptr[i + 1]
        if hi > d + 1:
            x[i] -= np.dot(data[d + 1:hi], x[indices[d + 1:hi]])
        x[i] /= data[d]
    return x
