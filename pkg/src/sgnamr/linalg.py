"""Sparse CSR matrices, Krylov solvers and preconditioners.

Everything here is hand-rolled on top of numpy arrays: the elliptic systems
produced by the dispersive correction are mildly nonsymmetric (bathymetry and
cross-derivative terms), so the workhorse is preconditioned BiCGStab with
restarted GMRES as an alternative.  Row entries are stored with ascending
column indices and the matvec accumulates them in that order, which makes
products reproducible bit for bit across runs and backends.
"""

from dataclasses import dataclass, field

import numpy as np

from . import backend


class SolverError(RuntimeError):
    """Raised when a Krylov solve fails to reach the requested tolerance."""

    def __init__(self, message, stats=None, x=None):
        super().__init__(message)
        self.stats = stats
        self.x = x


@dataclass
class SolverStats:
    method: str
    iterations: int
    residual: float
    converged: bool
    precond: str = "none"
    precond_reused: bool = False


@dataclass(frozen=True)
class CsrMatrix:
    """Square-or-rectangular CSR matrix; immutable after construction."""

    n_rows: int
    n_cols: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    _diag_ptr: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def nnz(self):
        return int(self.indices.shape[0])

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    def diag_ptr(self):
        """Positions of the diagonal entry of each row (square matrices).

        Raises ValueError naming the first row whose diagonal entry is not
        stored; preconditioners require an explicit (possibly zero) diagonal.
        """
        if self._diag_ptr is not None:
            return self._diag_ptr
        if self.n_rows != self.n_cols:
            raise ValueError("diagonal of a non-square matrix")
        dp = np.empty(self.n_rows, dtype=np.int64)
        for i in range(self.n_rows):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            k = lo + np.searchsorted(self.indices[lo:hi], i)
            if k >= hi or self.indices[k] != i:
                raise ValueError(f"row {i} has no stored diagonal entry")
            dp[i] = k
        object.__setattr__(self, "_diag_ptr", dp)
        return dp

    def diagonal(self):
        return self.data[self.diag_ptr()]

    def toarray(self):
        a = np.zeros(self.shape)
        for i in range(self.n_rows):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            a[i, self.indices[lo:hi]] = self.data[lo:hi]
        return a


def csr_from_entries(n_rows, n_cols, rows, cols, vals):
    """Build a CSR matrix from COO-style triplets.

    Duplicate (row, col) entries are summed (in input order, because the sort
    is stable).  Column indices within each row come out ascending.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if rows.shape != cols.shape or rows.shape != vals.shape:
        raise ValueError("rows, cols, vals must have identical shapes")
    if rows.size:
        if rows.min() < 0 or rows.max() >= n_rows:
            raise ValueError("row index out of range")
        if cols.min() < 0 or cols.max() >= n_cols:
            raise ValueError("column index out of range")
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if rows.size:
        first = np.empty(rows.shape[0], dtype=bool)
        first[0] = True
        np.not_equal(rows[1:], rows[:-1], out=first[1:])
        np.logical_or(first[1:], cols[1:] != cols[:-1], out=first[1:])
        starts = np.flatnonzero(first)
        data = np.add.reduceat(vals, starts)
        rows, cols = rows[starts], cols[starts]
    else:
        data = vals
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    np.cumsum(indptr, out=indptr)
    for a in (indptr, cols, data):
        a.flags.writeable = False
    return CsrMatrix(n_rows, n_cols, indptr, cols, data)


def matvec(A, x, out=None):
    """y = A @ x with per-row left-to-right accumulation."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != A.n_cols:
        raise ValueError("dimension mismatch in matvec")
    return backend.csr_matvec(A.indptr, A.indices, A.data, x, out)


def write_matrix_market(A, b, path):
    """Dump a system (matrix + right-hand side) in MatrixMarket format."""
    with open(path, "w") as f:
        f.write("%%MatrixMarket matrix coordinate real general\n")
        f.write(f"{A.n_rows} {A.n_cols} {A.nnz}\n")
        for i in range(A.n_rows):
            for k in range(A.indptr[i], A.indptr[i + 1]):
                f.write(f"{i + 1} {A.indices[k] + 1} {A.data[k]:.17e}\n")
        f.write(f"% rhs {b.shape[0]}\n")
        for v in b:
            f.write(f"% b {v:.17e}\n")


# ---------------------------------------------------------------------------
# preconditioners
# ---------------------------------------------------------------------------

class JacobiPreconditioner:
    kind = "jacobi"

    def __init__(self, A):
        d = A.diagonal()
        zero = np.flatnonzero(d == 0.0)
        if zero.size:
            raise ValueError(f"zero diagonal at row {int(zero[0])}")
        self._inv = 1.0 / d

    def apply(self, x, out=None):
        return np.multiply(x, self._inv, out=out)


class Ilu0Preconditioner:
    kind = "ilu0"

    def __init__(self, A):
        dp = A.diag_ptr()
        data = A.data.copy()
        bad = backend.ilu0_factor(A.indptr, A.indices, data, dp)
        if bad >= 0:
            raise ValueError(f"zero diagonal at row {int(bad)} during ILU(0)")
        self._indptr = A.indptr
        self._indices = A.indices
        self._data = data
        self._diag_ptr = dp

    def apply(self, x, out=None):
        return backend.ilu0_solve(self._indptr, self._indices, self._data,
                                  self._diag_ptr, x, out)


class IdentityPreconditioner:
    kind = "none"

    def apply(self, x, out=None):
        if out is None:
            return x.copy()
        out[:] = x
        return out


def make_preconditioner(A, kind):
    """Factor a preconditioner for A.

    kind is 'jacobi', 'ilu0', 'none', or 'auto', which picks ilu0 on the
    compiled backend and the cheaper jacobi on the pure-Python fallback.
    """
    if kind == "auto":
        kind = "ilu0" if backend.COMPILED else "jacobi"
    if kind == "jacobi":
        return JacobiPreconditioner(A)
    if kind == "ilu0":
        return Ilu0Preconditioner(A)
    if kind == "none":
        return IdentityPreconditioner()
    raise ValueError(f"unknown preconditioner kind '{kind}'")


# ---------------------------------------------------------------------------
# Krylov solvers (right-preconditioned, true-residual convergence tests)
# ---------------------------------------------------------------------------

def _norm(v):
    return float(np.sqrt(np.dot(v, v)))


def solve_krylov(A, b, x0=None, rtol=1e-9, maxit=500, method="bicgstab",
                 precond=None, precond_reused=False):
    """Solve A x = b to ||b - A x||_2 <= rtol * ||b||_2.

    Returns (x, SolverStats); raises SolverError (with the stats attached) if
    the tolerance is not reached within maxit iterations.  The iteration is
    deterministic for fixed inputs.
    """
    if precond is None:
        precond = IdentityPreconditioner()
    b = np.asarray(b, dtype=np.float64)
    bnorm = _norm(b)
    kind = getattr(precond, "kind", "none")
    if bnorm == 0.0:
        stats = SolverStats(method, 0, 0.0, True, kind, precond_reused)
        return np.zeros(A.n_cols), stats
    x = np.zeros(A.n_cols) if x0 is None else np.array(x0, dtype=np.float64)
    tol = rtol * bnorm
    if method == "bicgstab":
        x, iters, resid, ok = _bicgstab(A, b, x, tol, maxit, precond)
    elif method == "gmres":
        x, iters, resid, ok = _gmres(A, b, x, tol, maxit, precond, restart=30)
    else:
        raise ValueError(f"unknown Krylov method '{method}'")
    stats = SolverStats(method, iters, resid / bnorm, ok, kind, precond_reused)
    if not ok:
        raise SolverError(
            f"{method} stalled at relative residual {stats.residual:.3e} "
            f"after {iters} iterations (target {rtol:.1e})", stats, x)
    return x, stats


def _bicgstab(A, b, x, tol, maxit, M):
    r = b - matvec(A, x)
    rhat = r.copy()
    rho_prev = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    resid = _norm(r)
    if resid <= tol:
        true = b - matvec(A, x)
        if _norm(true) <= tol:
            return x, 0, _norm(true), True
        r = true
        resid = _norm(r)
    for it in range(1, maxit + 1):
        rho = float(np.dot(rhat, r))
        if rho == 0.0:
            return x, it - 1, resid, False
        if it == 1:
            p[:] = r
        else:
            beta = (rho / rho_prev) * (alpha / omega)
            p = r + beta * (p - omega * v)
        phat = M.apply(p)
        v = matvec(A, phat)
        denom = float(np.dot(rhat, v))
        if denom == 0.0:
            return x, it, resid, False
        alpha = rho / denom
        s = r - alpha * v
        x = x + alpha * phat
        snorm = _norm(s)
        if snorm <= tol:
            true = b - matvec(A, x)
            resid = _norm(true)
            if resid <= tol:
                return x, it, resid, True
            r = true
            rho_prev = rho
            continue
        shat = M.apply(s)
        t = matvec(A, shat)
        tt = float(np.dot(t, t))
        if tt == 0.0:
            return x, it, snorm, False
        omega = float(np.dot(t, s)) / tt
        if omega == 0.0:
            return x, it, snorm, False
        x = x + omega * shat
        r = s - omega * t
        resid = _norm(r)
        if resid <= tol:
            true = b - matvec(A, x)
            resid = _norm(true)
            if resid <= tol:
                return x, it, resid, True
            r = true
        rho_prev = rho
    return x, maxit, resid, False


def _gmres(A, b, x, tol, maxit, M, restart=30):
    total = 0
    resid = _norm(b - matvec(A, x))
    while total < maxit:
        r = b - matvec(A, x)
        beta = _norm(r)
        if beta <= tol:
            return x, total, beta, True
        m = min(restart, maxit - total)
        V = np.zeros((m + 1, b.shape[0]))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_used = 0
        for k in range(m):
            w = matvec(A, M.apply(V[k]))
            # modified Gram-Schmidt
            for j in range(k + 1):
                H[j, k] = float(np.dot(w, V[j]))
                w -= H[j, k] * V[j]
            H[k + 1, k] = _norm(w)
            if H[k + 1, k] != 0.0:
                V[k + 1] = w / H[k + 1, k]
            # apply stored Givens rotations, then a new one
            for j in range(k):
                t = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
                H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
                H[j, k] = t
            denom = np.hypot(H[k, k], H[k + 1, k])
            if denom == 0.0:
                k_used = k + 1
                break
            cs[k] = H[k, k] / denom
            sn[k] = H[k + 1, k] / denom
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            k_used = k + 1
            total += 1
            if abs(g[k + 1]) <= tol or H[k + 1, k_used - 1] == 0.0:
                break
        # back-substitute the k_used x k_used triangular system
        y = np.zeros(k_used)
        for i in range(k_used - 1, -1, -1):
            y[i] = (g[i] - np.dot(H[i, i + 1:k_used], y[i + 1:k_used])) / H[i, i]
        x = x + M.apply(V[:k_used].T @ y)
        resid = _norm(b - matvec(A, x))
        if resid <= tol:
            return x, total, resid, True
    return x, total, resid, False
