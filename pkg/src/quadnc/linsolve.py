"""Sparse linear algebra: CSR storage, Jacobi-preconditioned conjugate
gradients, and a Schur-complement (Uzawa-type) saddle-point solver.

Solver tolerances default to 1e-12 (SPD) and 1e-10 (saddle) so algebraic
error stays far below discretization error in every benchmark.  All
iterations are deterministic for fixed inputs.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence
from .kernels import csr_matvec


@dataclass
class CsrMatrix:
    """Compressed-sparse-row matrix with sorted, unique columns per row."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    shape: tuple

    @classmethod
    def from_coo(cls, rows, cols, vals, shape):
        """Build from triplets; duplicate entries are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        nrows, ncols = shape
        if rows.size == 0:
            return cls(
                indptr=np.zeros(nrows + 1, dtype=np.int64),
                indices=np.empty(0, dtype=np.int64),
                data=np.empty(0),
                shape=(nrows, ncols),
            )
        order = np.lexsort((cols, rows))
        r = rows[order]
        c = cols[order]
        v = vals[order]
        first = np.empty(len(r), dtype=bool)
        first[0] = True
        first[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
        starts = np.flatnonzero(first)
        data = np.add.reduceat(v, starts)
        r_u = r[starts]
        c_u = c[starts]
        counts = np.bincount(r_u, minlength=nrows)
        indptr = np.zeros(nrows + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return cls(indptr=indptr, indices=c_u, data=data, shape=(nrows, ncols))

    @property
    def nnz(self):
        return len(self.data)

    def matvec(self, x):
        x = np.ascontiguousarray(x, dtype=float)
        return csr_matvec(self.indptr, self.indices, self.data, x)

    def __matmul__(self, x):
        return self.matvec(x)

    def transpose(self):
        nrows, ncols = self.shape
        rows = np.repeat(np.arange(nrows, dtype=np.int64), np.diff(self.indptr))
        return CsrMatrix.from_coo(self.indices, rows, self.data, (ncols, nrows))

    def diagonal(self):
        n = min(self.shape)
        rows = np.repeat(np.arange(self.shape[0], dtype=np.int64), np.diff(self.indptr))
        on_diag = (rows == self.indices) & (rows < n)
        diag = np.zeros(n)
        diag[rows[on_diag]] = self.data[on_diag]
        return diag

    def todense(self):
        out = np.zeros(self.shape)
        rows = np.repeat(np.arange(self.shape[0]), np.diff(self.indptr))
        out[rows, self.indices] = self.data
        return out


def cg_jacobi(A, f, tol=1e-12, maxit=50000):
    """Jacobi-preconditioned CG.  Returns (x, iterations, relative residual).

    Convergence criterion: ||f - A x|| / ||f|| <= tol (true residual via
    the CG recursion).
    """
    f = np.asarray(f, dtype=float)
    fnorm = np.linalg.norm(f)
    if fnorm == 0.0:
        return np.zeros_like(f), 0, 0.0
    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise ValueError("matrix has non-positive diagonal entries; not SPD")
    inv_diag = 1.0 / diag
    x = np.zeros_like(f)
    r = f.copy()
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    best_x = x.copy()
    best_res = 1.0
    for it in range(1, maxit + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0.0:
            raise ValueError("encountered non-positive curvature; matrix not SPD")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / fnorm
        if res < best_res:
            best_res = res
            best_x = x.copy()
        if res <= tol:
            return x, it, res
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NoConvergence(
        f"CG did not reach tol={tol:g} in {maxit} iterations "
        f"(best residual {best_res:.3e})",
        best_x=best_x,
        residual=best_res,
        iterations=maxit,
    )


def solve_spd(A, f, tol=1e-12, maxit=50000):
    """Solve A x = f for symmetric positive definite A."""
    x, _, _ = cg_jacobi(A, f, tol=tol, maxit=maxit)
    return x


def solve_saddle(A, B, f, g=None, tol=1e-10, inner_tol=1e-12, maxit=300,
                 areas=None, inner_maxit=50000):
    """Solve the saddle system  A u + B^T p = f,  B u = g.

    Conjugate-gradient Uzawa iteration on the pressure Schur complement
    S = B A^{-1} B^T, preconditioned by the lumped pressure mass matrix
    (cell areas); every application of S performs an inner SPD solve
    with A.  The constant pressure mode spans the null space of S; the
    returned pressure is shifted to zero area-weighted mean.

    Returns (u, p).
    """
    f = np.asarray(f, dtype=float)
    n_p = B.shape[0]
    g = np.zeros(n_p) if g is None else np.asarray(g, dtype=float)
    if areas is None:
        areas = np.ones(n_p)
    Bt = B.transpose()

    def inner(rhs):
        return solve_spd(A, rhs, tol=inner_tol, maxit=inner_maxit)

    u0 = inner(f)
    r = B @ u0 - g
    r -= r.mean()  # Schur residuals live orthogonal to constants
    rnorm0 = np.linalg.norm(r)
    p = np.zeros(n_p)
    if rnorm0 == 0.0:
        return u0, p
    z = r / areas
    d = z.copy()
    rz = r @ z
    best = (p.copy(), 1.0)
    for it in range(1, maxit + 1):
        Sd = B @ inner(Bt @ d)
        dSd = d @ Sd
        if dSd <= 0.0:
            raise NoConvergence(
                "Schur complement lost positivity", best_x=best[0],
                residual=best[1], iterations=it,
            )
        alpha = rz / dSd
        p += alpha * d
        r -= alpha * Sd
        r -= r.mean()
        res = np.linalg.norm(r) / rnorm0
        if res < best[1]:
            best = (p.copy(), res)
        if res <= tol:
            break
        z = r / areas
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    else:
        raise NoConvergence(
            f"Uzawa/Schur CG did not reach tol={tol:g} in {maxit} iterations "
            f"(best residual {best[1]:.3e})",
            best_x=best[0],
            residual=best[1],
            iterations=maxit,
        )
    u = inner(f - Bt @ p)
    wsum = areas @ p
    p = p - wsum / areas.sum()
    return u, p
