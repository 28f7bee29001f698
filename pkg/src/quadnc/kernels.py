"""Hot loops behind element tabulation and sparse matrix-vector products.

Every kernel exists twice: a numba-jitted cell loop and a vectorized
pure-numpy fallback.  :mod:`quadnc.backend` picks the active pair via
the ``QUADNC_BACKEND`` environment variable; both stay importable so
tests can assert agreement and ``benchmarks/backend_bench.py`` can time
them against each other.

Tabulation returns, for a batch of cells and a reference quadrature
rule: nodal basis values ``V`` (nc, nq, k), physical gradients ``G``
(nc, nq, k, 2), quadrature weights times |det DF| ``W`` (nc, nq), and
physical point locations ``X`` (nc, nq, 2).

Note: the parametric raw basis is a fixed function of the reference
point, but it is deliberately re-evaluated for every cell here (the
numpy path broadcasts the evaluation to (nc, nq)).  Per-cell basis
construction is part of the timed work for both element families in the
timing benchmark, so neither path may hoist it out of the cell loop.
"""

import numpy as np

from . import backend
from .refelem import (
    mu_tilde,
    mu_tilde_grad,
    parametric_basis_eval,
    ParametricElement,
    shape_values,
)

__all__ = [
    "tabulate_nonparametric",
    "tabulate_parametric",
    "csr_matvec",
    "IMPLEMENTATIONS",
]


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def _tabulate_nonparametric_numpy(A, b, s, detA, AinvT, coefs, ctilde, qp, qw):
    x1 = qp[:, 0]
    x2 = qp[:, 1]
    cross = x1 * x2
    xt = qp[None, :, :] + cross[None, :, None] * s[:, None, :]   # (nc, nq, 2)
    sb = s[:, None, :]
    raw_v = shape_values(xt, sb, ctilde)                          # (nc, nq, 4)
    mg = mu_tilde_grad(xt, sb, ctilde)                            # (nc, nq, 2)
    V = np.einsum("cik,cqk->cqi", coefs, raw_v, optimize=True)
    # Raw gradients are sparse: rows (0,0), (1,0), (0,1), grad(mu).
    gt1 = coefs[:, None, :, 1] + coefs[:, None, :, 3] * mg[:, :, None, 0]
    gt2 = coefs[:, None, :, 2] + coefs[:, None, :, 3] * mg[:, :, None, 1]
    G = np.empty(V.shape + (2,))
    G[..., 0] = AinvT[:, None, None, 0, 0] * gt1 + AinvT[:, None, None, 0, 1] * gt2
    G[..., 1] = AinvT[:, None, None, 1, 0] * gt1 + AinvT[:, None, None, 1, 1] * gt2
    det = detA[:, None] * (1.0 + x1[None, :] * s[:, 1:2] + x2[None, :] * s[:, 0:1])
    W = np.abs(det) * qw[None, :]
    X = np.einsum("cde,cqe->cqd", A, xt, optimize=True) + b[:, None, :]
    return V, G, W, X


def _tabulate_parametric_numpy(A, b, d, coefs, variant, augmented, qp, qw):
    nc = A.shape[0]
    nq = qp.shape[0]
    el = ParametricElement(variant_l=variant, augmented=augmented)
    xh = np.broadcast_to(qp, (nc, nq, 2))
    raw_v, raw_g = parametric_basis_eval(el, xh)                  # per-cell eval
    V = np.einsum("ik,cqk->cqi", coefs, raw_v, optimize=True)
    Gh = np.einsum("ik,cqkd->cqid", coefs, raw_g, optimize=True)
    x1 = qp[:, 0]
    x2 = qp[:, 1]
    df00 = A[:, None, 0, 0] + x2[None, :] * d[:, None, 0]
    df10 = A[:, None, 1, 0] + x2[None, :] * d[:, None, 1]
    df01 = A[:, None, 0, 1] + x1[None, :] * d[:, None, 0]
    df11 = A[:, None, 1, 1] + x1[None, :] * d[:, None, 1]
    det = df00 * df11 - df01 * df10
    G = np.empty_like(Gh)
    G[..., 0] = (df11[..., None] * Gh[..., 0] - df10[..., None] * Gh[..., 1]) / det[..., None]
    G[..., 1] = (-df01[..., None] * Gh[..., 0] + df00[..., None] * Gh[..., 1]) / det[..., None]
    W = np.abs(det) * qw[None, :]
    X = (
        np.einsum("cde,qe->cqd", A, qp, optimize=True)
        + (x1 * x2)[None, :, None] * d[:, None, :]
        + b[:, None, :]
    )
    return V, G, W, X


def _csr_matvec_numpy(indptr, indices, data, x):
    prod = data * x[indices]
    nrows = len(indptr) - 1
    y = np.zeros(nrows)
    lengths = np.diff(indptr)
    nz = lengths > 0
    if np.any(nz):
        y[nz] = np.add.reduceat(prod, indptr[:-1][nz])
    return y


_NUMPY_IMPL = {
    "tabulate_nonparametric": _tabulate_nonparametric_numpy,
    "tabulate_parametric": _tabulate_parametric_numpy,
    "csr_matvec": _csr_matvec_numpy,
}

IMPLEMENTATIONS = {"numpy": _NUMPY_IMPL}


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if backend.HAS_NUMBA:
    from numba import njit

    @njit(cache=True, inline="always")
    def _mu_val_grad(xt1, xt2, s1, s2, ct):
        l1 = xt1 - xt2 + s2 - s1
        l2 = xt1 + xt2 + s1 + s2
        a = xt1 + 0.4 * s2
        bb = xt2 + 0.4 * s1
        r2 = (6.0 / 25.0) * (2.5 - s1 * s1 - s2 * s2)
        q = a * a + bb * bb - r2 + ct * (a * bb + (6.0 / 25.0) * s1 * s2)
        dq1 = 2.0 * a + ct * bb
        dq2 = 2.0 * bb + ct * a
        val = -(5.0 / 3.0) * l1 * l2 * q
        g1 = -(5.0 / 3.0) * ((l1 + l2) * q + l1 * l2 * dq1)
        g2 = -(5.0 / 3.0) * ((l1 - l2) * q + l1 * l2 * dq2)
        return val, g1, g2

    @njit(cache=True)
    def _tabulate_nonparametric_numba(A, b, s, detA, AinvT, coefs, ctilde, qp, qw):
        nc = A.shape[0]
        nq = qp.shape[0]
        V = np.empty((nc, nq, 4))
        G = np.empty((nc, nq, 4, 2))
        W = np.empty((nc, nq))
        X = np.empty((nc, nq, 2))
        for c in range(nc):
            s1 = s[c, 0]
            s2 = s[c, 1]
            for q in range(nq):
                x1 = qp[q, 0]
                x2 = qp[q, 1]
                cross = x1 * x2
                xt1 = x1 + cross * s1
                xt2 = x2 + cross * s2
                mu, mg1, mg2 = _mu_val_grad(xt1, xt2, s1, s2, ctilde)
                for i in range(4):
                    V[c, q, i] = (
                        coefs[c, i, 0]
                        + coefs[c, i, 1] * xt1
                        + coefs[c, i, 2] * xt2
                        + coefs[c, i, 3] * mu
                    )
                    gt1 = coefs[c, i, 1] + coefs[c, i, 3] * mg1
                    gt2 = coefs[c, i, 2] + coefs[c, i, 3] * mg2
                    G[c, q, i, 0] = AinvT[c, 0, 0] * gt1 + AinvT[c, 0, 1] * gt2
                    G[c, q, i, 1] = AinvT[c, 1, 0] * gt1 + AinvT[c, 1, 1] * gt2
                W[c, q] = abs(detA[c] * (1.0 + x1 * s2 + x2 * s1)) * qw[q]
                X[c, q, 0] = A[c, 0, 0] * xt1 + A[c, 0, 1] * xt2 + b[c, 0]
                X[c, q, 1] = A[c, 1, 0] * xt1 + A[c, 1, 1] * xt2 + b[c, 1]
        return V, G, W, X

    @njit(cache=True, inline="always")
    def _phi_val_deriv(t, variant):
        t2 = t * t
        if variant == 1:
            return t2 - (5.0 / 3.0) * t2 * t2, 2.0 * t - (20.0 / 3.0) * t * t2
        return (
            t2 - (25.0 / 6.0) * t2 * t2 + 3.5 * t2 * t2 * t2,
            2.0 * t - (50.0 / 3.0) * t * t2 + 21.0 * t * t2 * t2,
        )

    @njit(cache=True)
    def _tabulate_parametric_numba(A, b, d, coefs, variant, augmented, qp, qw):
        nc = A.shape[0]
        nq = qp.shape[0]
        k = 5 if augmented else 4
        V = np.empty((nc, nq, k))
        G = np.empty((nc, nq, k, 2))
        W = np.empty((nc, nq))
        X = np.empty((nc, nq, 2))
        rv = np.empty(k)
        rg = np.empty((k, 2))
        for c in range(nc):
            for q in range(nq):
                x1 = qp[q, 0]
                x2 = qp[q, 1]
                pv1, pd1 = _phi_val_deriv(x1, variant)
                pv2, pd2 = _phi_val_deriv(x2, variant)
                rv[0] = 1.0
                rv[1] = x1
                rv[2] = x2
                rg[0, 0] = 0.0
                rg[0, 1] = 0.0
                rg[1, 0] = 1.0
                rg[1, 1] = 0.0
                rg[2, 0] = 0.0
                rg[2, 1] = 1.0
                if augmented:
                    rv[3] = x1 * x2
                    rg[3, 0] = x2
                    rg[3, 1] = x1
                rv[k - 1] = pv1 - pv2
                rg[k - 1, 0] = pd1
                rg[k - 1, 1] = -pd2
                df00 = A[c, 0, 0] + x2 * d[c, 0]
                df10 = A[c, 1, 0] + x2 * d[c, 1]
                df01 = A[c, 0, 1] + x1 * d[c, 0]
                df11 = A[c, 1, 1] + x1 * d[c, 1]
                det = df00 * df11 - df01 * df10
                for i in range(k):
                    v = 0.0
                    gh1 = 0.0
                    gh2 = 0.0
                    for kk in range(k):
                        v += coefs[i, kk] * rv[kk]
                        gh1 += coefs[i, kk] * rg[kk, 0]
                        gh2 += coefs[i, kk] * rg[kk, 1]
                    V[c, q, i] = v
                    G[c, q, i, 0] = (df11 * gh1 - df10 * gh2) / det
                    G[c, q, i, 1] = (-df01 * gh1 + df00 * gh2) / det
                W[c, q] = abs(det) * qw[q]
                cross = x1 * x2
                X[c, q, 0] = A[c, 0, 0] * x1 + A[c, 0, 1] * x2 + cross * d[c, 0] + b[c, 0]
                X[c, q, 1] = A[c, 1, 0] * x1 + A[c, 1, 1] * x2 + cross * d[c, 1] + b[c, 1]
        return V, G, W, X

    @njit(cache=True)
    def _csr_matvec_numba(indptr, indices, data, x):
        nrows = len(indptr) - 1
        y = np.empty(nrows)
        for i in range(nrows):
            acc = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                acc += data[p] * x[indices[p]]
            y[i] = acc
        return y

    IMPLEMENTATIONS["numba"] = {
        "tabulate_nonparametric": _tabulate_nonparametric_numba,
        "tabulate_parametric": _tabulate_parametric_numba,
        "csr_matvec": _csr_matvec_numba,
    }


_active = IMPLEMENTATIONS[backend.selected()]
tabulate_nonparametric = _active["tabulate_nonparametric"]
tabulate_parametric = _active["tabulate_parametric"]
csr_matvec = _active["csr_matvec"]


def warmup():
    """Trigger JIT compilation of the active kernels on tiny inputs."""
    A = np.eye(2)[None, :, :].copy()
    b = np.zeros((1, 2))
    d = np.full((1, 2), 0.1)
    s = np.full((1, 2), 0.1)
    detA = np.ones(1)
    AinvT = np.eye(2)[None, :, :].copy()
    coefs4 = np.eye(4)[None, :, :].copy()
    qp = np.array([[0.25, -0.5]])
    qw = np.array([4.0])
    tabulate_nonparametric(A, b, s, detA, AinvT, coefs4, 0.0, qp, qw)
    tabulate_parametric(A, b, d, np.eye(5), 1, True, qp, qw)
    tabulate_parametric(A, b, d, np.eye(4), 1, False, qp, qw)
    csr_matvec(np.array([0, 1]), np.array([0]), np.array([1.0]), np.array([1.0]))
