"""Quadrilateral geometry and the split of the bilinear cell map.

A convex quadrilateral K with vertices v1..v4 is the image of the
reference square Khat = [-1,1]^2 under the bilinear map

    F(xhat) = A xhat + xhat1*xhat2 * d + b.

F factors as an affine map applied after a *simple* bilinear map,

    F = (x -> A x + b)  o  (xhat -> xhat + xhat1*xhat2 * s),   s = A^{-1} d,

so all non-affine distortion is carried by the single vector s.  The
image of Khat under the simple map is the intermediate quadrilateral on
which the four-DOF nonconforming basis is built; its edge midpoints
coincide with those of Khat.

Vertex convention: vhat1 = (1,1), vhat2 = (-1,1), vhat3 = (-1,-1),
vhat4 = (1,-1) (counterclockwise from the top-right corner); edge e_j
joins v_{j-1} and v_j with v_0 := v_4.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SingularMap

# Reference-square vertices and edge midpoints, in convention order.
REF_VERTICES = np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])
REF_MIDPOINTS = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])


@dataclass(frozen=True)
class BilinearDecomposition:
    """Constituents of F(xhat) = A xhat + xhat1*xhat2*d + b, with s = A^{-1}d."""

    A: np.ndarray
    b: np.ndarray
    d: np.ndarray
    s_tilde: np.ndarray


def decompose(quad):
    """Split the bilinear map of a quadrilateral into affine and simple parts.

    Parameters
    ----------
    quad : (4, 2) array
        Vertices v1..v4 in convention order (see module docstring).

    Returns
    -------
    BilinearDecomposition

    Raises
    ------
    SingularMap
        If |det A| <= 1e-14 * diam(quad)^2 (degenerate or bow-tie cell).
    """
    v = np.asarray(quad, dtype=float)
    if v.shape != (4, 2):
        raise ValueError(f"expected 4 vertices, got shape {v.shape}")
    v1, v2, v3, v4 = v
    A = np.column_stack((v1 - v2 - v3 + v4, v1 + v2 - v3 - v4)) / 4.0
    d = (v1 - v2 + v3 - v4) / 4.0
    b = (v1 + v2 + v3 + v4) / 4.0
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    diam2 = max(
        float(np.sum((v[i] - v[j]) ** 2))
        for i in range(4)
        for j in range(i + 1, 4)
    )
    if abs(det) <= 1e-14 * diam2:
        raise SingularMap(f"|det A| = {abs(det):.3e} below degeneracy threshold")
    s = np.linalg.solve(A, d)
    return BilinearDecomposition(A=A, b=b, d=d, s_tilde=s)


def forward_map(dec, xhat):
    """Evaluate F(xhat) = A xhat + xhat1*xhat2*d + b.  Broadcasts over (..., 2)."""
    xhat = np.asarray(xhat, dtype=float)
    lin = xhat @ dec.A.T
    return lin + (xhat[..., 0] * xhat[..., 1])[..., None] * dec.d + dec.b


def jacobian(dec, xhat):
    """Jacobian DF(xhat); columns A[:,0] + xhat2*d and A[:,1] + xhat1*d."""
    xhat = np.asarray(xhat, dtype=float)
    out = np.broadcast_to(dec.A, xhat.shape[:-1] + (2, 2)).copy()
    out[..., :, 0] += xhat[..., 1, None] * dec.d
    out[..., :, 1] += xhat[..., 0, None] * dec.d
    return out


def simple_map(xhat, s_tilde):
    """Apply the simple bilinear map xhat -> xhat + xhat1*xhat2*s."""
    xhat = np.asarray(xhat, dtype=float)
    s = np.asarray(s_tilde, dtype=float)
    return xhat + (xhat[..., 0] * xhat[..., 1])[..., None] * s


def intermediate_quad(s_tilde):
    """Vertices of the intermediate quadrilateral: vhat_j -+ s, alternating."""
    s = np.asarray(s_tilde, dtype=float)
    signs = np.array([1.0, -1.0, 1.0, -1.0])[:, None]
    return REF_VERTICES + signs * s


def convexity_margin(s_tilde):
    """Return 1 - |s1| - |s2|.

    Positive iff the intermediate quadrilateral is strictly convex; zero
    exactly when it degenerates to a triangle.
    """
    s = np.asarray(s_tilde, dtype=float)
    return 1.0 - np.abs(s[..., 0]) - np.abs(s[..., 1])


def decompose_cells(verts):
    """Vectorized decomposition for a batch of cells.

    Parameters
    ----------
    verts : (nc, 4, 2) array

    Returns
    -------
    A : (nc, 2, 2), b : (nc, 2), d : (nc, 2), s : (nc, 2), detA : (nc,)

    Raises
    ------
    SingularMap
        If any cell's |det A| falls below the scale-invariant threshold.
    """
    v = np.asarray(verts, dtype=float)
    v1, v2, v3, v4 = v[:, 0], v[:, 1], v[:, 2], v[:, 3]
    A = np.stack((v1 - v2 - v3 + v4, v1 + v2 - v3 - v4), axis=-1) / 4.0
    d = (v1 - v2 + v3 - v4) / 4.0
    b = (v1 + v2 + v3 + v4) / 4.0
    detA = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    diff = v[:, :, None, :] - v[:, None, :, :]
    diam2 = np.max(np.sum(diff * diff, axis=-1), axis=(1, 2))
    bad = np.abs(detA) <= 1e-14 * diam2
    if np.any(bad):
        raise SingularMap(f"{int(bad.sum())} degenerate cell(s), first at index "
                          f"{int(np.argmax(bad))}")
    # 2x2 solve for s = A^{-1} d, written out to stay cheap on big batches.
    s1 = (A[:, 1, 1] * d[:, 0] - A[:, 0, 1] * d[:, 1]) / detA
    s2 = (A[:, 0, 0] * d[:, 1] - A[:, 1, 0] * d[:, 0]) / detA
    s = np.stack((s1, s2), axis=-1)
    return A, b, d, s, detA
