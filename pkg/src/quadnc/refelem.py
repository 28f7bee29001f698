"""Reference bases for the two nonconforming quadrilateral element families.

Parametric family: on the reference square, span{1, x1, x2, psi_l} with
psi_l(x) = phi_l(x1) - phi_l(x2), optionally augmented by x1*x2 (with the
cell moment integral as fifth degree of freedom) so the mapped space
contains all linears on true quadrilaterals.

Nonparametric family: on the intermediate quadrilateral with distortion
vector s, span{1, x1, x2, mu} where mu is a quartic built as a product
of the two diagonal lines and a quadratic chosen so that every function
in the span has its mean over each edge equal to its value at the edge
midpoint.  The quadratic is a one-parameter family in c (c = 0 gives a
circle); the four midpoint values determine the function whenever
s1^2 + s2^2 + 1/3 + c*s1*s2 != 0.

All evaluation routines broadcast over leading axes: points are
(..., 2) arrays, the distortion vector may itself be batched.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadVariant, Degenerate, NotUnisolvent
from .geometry import REF_MIDPOINTS, intermediate_quad

XI = np.sqrt(3.0 / 5.0)   # edge Gauss offset, 3-point rule
ETA = np.sqrt(2.0 / 5.0)  # offset of the circle-condition points

# Edge tangent directions of the intermediate quad: edge j is
# midpoint_j + t * tangent_j, t in [-1, 1].
_U1 = np.array([1.0, 0.0])
_U2 = np.array([0.0, 1.0])


def phi(t, l=1):
    """Even bubble profile: t^2 - (5/3)t^4 (l=1) or t^2 - (25/6)t^4 + (7/2)t^6 (l=2).

    Both have zero mean over [-1,1] and vanish at t = 0, which is what
    makes edge means of psi_l coincide with midpoint values.
    """
    t = np.asarray(t, dtype=float)
    t2 = t * t
    if l == 1:
        return t2 - (5.0 / 3.0) * t2 * t2
    if l == 2:
        return t2 - (25.0 / 6.0) * t2 * t2 + 3.5 * t2 * t2 * t2
    raise BadVariant(f"variant l must be 1 or 2, got {l!r}")


def phi_prime(t, l=1):
    t = np.asarray(t, dtype=float)
    t2 = t * t
    if l == 1:
        return 2.0 * t - (20.0 / 3.0) * t * t2
    if l == 2:
        return 2.0 * t - (50.0 / 3.0) * t * t2 + 21.0 * t * t2 * t2
    raise BadVariant(f"variant l must be 1 or 2, got {l!r}")


def psi_hat(xhat, l=1):
    """psi_l(x) = phi_l(x1) - phi_l(x2) on the reference square."""
    xhat = np.asarray(xhat, dtype=float)
    return phi(xhat[..., 0], l) - phi(xhat[..., 1], l)


def psi_hat_grad(xhat, l=1):
    xhat = np.asarray(xhat, dtype=float)
    return np.stack(
        (phi_prime(xhat[..., 0], l), -phi_prime(xhat[..., 1], l)), axis=-1
    )


def ell(xt, s_tilde):
    """The two diagonal lines of the intermediate quad.

    Returns (l1, l2) with l1 = x1 - x2 + s2 - s1 vanishing on the
    v1--v3 diagonal and l2 = x1 + x2 + s1 + s2 on the v2--v4 diagonal.
    """
    xt = np.asarray(xt, dtype=float)
    s = np.asarray(s_tilde, dtype=float)
    l1 = xt[..., 0] - xt[..., 1] + s[..., 1] - s[..., 0]
    l2 = xt[..., 0] + xt[..., 1] + s[..., 0] + s[..., 1]
    return l1, l2


def radius_squared(s_tilde):
    """r^2 = (6/25)(5/2 - s1^2 - s2^2); positive for convex distortions."""
    s = np.asarray(s_tilde, dtype=float)
    return (6.0 / 25.0) * (2.5 - s[..., 0] ** 2 - s[..., 1] ** 2)


def q_tilde(xt, s_tilde, c_tilde):
    """Quadratic factor of the bubble.

    (x1 + 2s2/5)^2 + (x2 + 2s1/5)^2 - r^2
        + c * [(x1 + 2s2/5)(x2 + 2s1/5) + (6/25) s1 s2],

    the general quadratic whose edge 3-point-Gauss combination
    q(g-) + q(g+) - 5 q(m) vanishes on all four edges.  c = 0 is the
    circle centered at (-2s2/5, -2s1/5).
    """
    xt = np.asarray(xt, dtype=float)
    s = np.asarray(s_tilde, dtype=float)
    s1, s2 = s[..., 0], s[..., 1]
    a = xt[..., 0] + 0.4 * s2
    b = xt[..., 1] + 0.4 * s1
    return a * a + b * b - radius_squared(s_tilde) + c_tilde * (
        a * b + (6.0 / 25.0) * s1 * s2
    )


def mu_tilde(xt, s_tilde, c_tilde=0.0):
    """Quartic bubble mu = -(5/3) * l1 * l2 * q on the intermediate quad."""
    l1, l2 = ell(xt, s_tilde)
    return -(5.0 / 3.0) * l1 * l2 * q_tilde(xt, s_tilde, c_tilde)


def mu_tilde_grad(xt, s_tilde, c_tilde=0.0):
    """Exact gradient of mu_tilde (product rule on the three factors)."""
    xt = np.asarray(xt, dtype=float)
    s = np.asarray(s_tilde, dtype=float)
    s1, s2 = s[..., 0], s[..., 1]
    l1, l2 = ell(xt, s_tilde)
    a = xt[..., 0] + 0.4 * s2
    b = xt[..., 1] + 0.4 * s1
    q = a * a + b * b - radius_squared(s_tilde) + c_tilde * (
        a * b + (6.0 / 25.0) * s1 * s2
    )
    dq1 = 2.0 * a + c_tilde * b
    dq2 = 2.0 * b + c_tilde * a
    g1 = (l1 + l2) * q + l1 * l2 * dq1
    g2 = (l1 - l2) * q + l1 * l2 * dq2
    return -(5.0 / 3.0) * np.stack((g1, g2), axis=-1)


@dataclass(frozen=True)
class EdgeGaussSet:
    """Edge quadrature points of the intermediate quad.

    ``g``: the eight 3-point-Gauss side nodes (offset xi = sqrt(3/5)),
    ``m``: the four edge midpoints, ``eta``: the eight points at offset
    sqrt(2/5) entering the circle-center conditions.
    """

    g: np.ndarray
    m: np.ndarray
    eta: np.ndarray


def edge_tangents(s_tilde):
    """Tangent vectors of the four intermediate-quad edges (rows)."""
    s = np.asarray(s_tilde, dtype=float)
    return np.stack((_U2 + s, _U1 + s, _U2 - s, _U1 - s))


def edge_gauss_set(s_tilde):
    t = edge_tangents(s_tilde)
    m = REF_MIDPOINTS
    signs = np.array([-1.0, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0, 1.0])
    pair = np.repeat(np.arange(4), 2)
    g = m[pair] + signs[:, None] * XI * t[pair]
    eta = m[pair] + signs[:, None] * ETA * t[pair]
    return EdgeGaussSet(g=g, m=m.copy(), eta=eta)


def mean_value_residual(s_tilde, c_tilde=0.0):
    """For each edge j: mu(g_{2j-1}) + mu(g_{2j}) - 2 mu(m_j).

    Vanishing of all four residuals is equivalent (3-point Gauss is
    exact for quartics) to the bubble's edge means matching its
    midpoint values.
    """
    es = edge_gauss_set(s_tilde)
    mu_g = mu_tilde(es.g, np.asarray(s_tilde, dtype=float), c_tilde)
    mu_m = mu_tilde(es.m, np.asarray(s_tilde, dtype=float), c_tilde)
    return mu_g[0::2] + mu_g[1::2] - 2.0 * mu_m


def unisolvency_det(s_tilde, c_tilde=0.0):
    """Closed form 16*(s1^2 + s2^2 + 1/3 + c*s1*s2) of the 4x4 midpoint
    evaluation determinant."""
    s = np.asarray(s_tilde, dtype=float)
    s1, s2 = s[..., 0], s[..., 1]
    return 16.0 * (s1 * s1 + s2 * s2 + 1.0 / 3.0 + c_tilde * s1 * s2)


def shape_values(xt, s_tilde, c_tilde=0.0):
    """Values of the raw span (1, x1, x2, mu) at points xt, stacked last."""
    xt = np.asarray(xt, dtype=float)
    ones = np.ones(xt.shape[:-1])
    return np.stack(
        (ones, xt[..., 0], xt[..., 1], mu_tilde(xt, s_tilde, c_tilde)), axis=-1
    )


def shape_gradients(xt, s_tilde, c_tilde=0.0):
    """Gradients of the raw span, shape (..., 4, 2)."""
    xt = np.asarray(xt, dtype=float)
    base = xt.shape[:-1]
    out = np.zeros(base + (4, 2))
    out[..., 1, 0] = 1.0
    out[..., 2, 1] = 1.0
    out[..., 3, :] = mu_tilde_grad(xt, s_tilde, c_tilde)
    return out


def vandermonde(s_tilde, c_tilde=0.0):
    """4x4 matrix a[j, k] = (raw function j)(midpoint k)."""
    return shape_values(REF_MIDPOINTS, np.asarray(s_tilde, dtype=float), c_tilde).T


@dataclass(frozen=True)
class NonparametricElement:
    """Four-DOF element on the intermediate quadrilateral.

    ``nodal[i, k]`` are the coefficients of the i-th nodal basis
    function (value 1 at midpoint i, 0 at the others) against the raw
    span (1, x1, x2, mu).
    """

    s_tilde: np.ndarray
    c_tilde: float
    r2: float
    nodal: np.ndarray

    def eval(self, xt):
        """Nodal basis values at points, shape (..., 4)."""
        return shape_values(xt, self.s_tilde, self.c_tilde) @ self.nodal.T

    def eval_grad(self, xt):
        """Nodal basis gradients at points, shape (..., 4, 2)."""
        g = shape_gradients(xt, self.s_tilde, self.c_tilde)
        return np.einsum("ik,...kd->...id", self.nodal, g)


# Rejection threshold for the midpoint-evaluation determinant, relative
# to its s = 0 value 16/3.
UNISOLVENCY_RTOL = 1e-10


def nodal_basis(s_tilde, c_tilde=0.0):
    """Construct the nodal basis; raises NotUnisolvent near determinant zeros."""
    s = np.asarray(s_tilde, dtype=float)
    a = vandermonde(s, c_tilde)
    det = np.linalg.det(a)
    if abs(det) < UNISOLVENCY_RTOL * (16.0 / 3.0):
        raise NotUnisolvent(
            f"midpoint DOFs are degenerate for s={s.tolist()}, c={c_tilde} "
            f"(det={det:.3e})"
        )
    nodal = np.linalg.inv(a)
    return NonparametricElement(
        s_tilde=s, c_tilde=float(c_tilde), r2=float(radius_squared(s)), nodal=nodal
    )


def nodal_coefficients(svec, c_tilde=0.0):
    """Batched nodal coefficients for cells with distortions svec (nc, 2).

    Returns (nc, 4, 4); raises NotUnisolvent if any cell fails the
    determinant threshold.
    """
    svec = np.asarray(svec, dtype=float)
    m = REF_MIDPOINTS
    nc = svec.shape[0]
    a = np.empty((nc, 4, 4))
    a[:, 0, :] = 1.0
    a[:, 1, :] = m[:, 0]
    a[:, 2, :] = m[:, 1]
    a[:, 3, :] = mu_tilde(m, svec[:, None, :], c_tilde)
    det = unisolvency_det(svec, c_tilde)
    bad = np.abs(det) < UNISOLVENCY_RTOL * (16.0 / 3.0)
    if np.any(bad):
        raise NotUnisolvent(
            f"{int(bad.sum())} cell(s) fail unisolvency, first at index "
            f"{int(np.argmax(bad))}"
        )
    return np.linalg.inv(a)


def circle_center_check(s_tilde):
    """Recover the c = 0 circle from the edge-point products.

    Solves the four conditions (center - eta_{2j-1}) . (center - eta_{2j})
    = r^2 by least squares in (c1, c2, r^2 - |c|^2).  The result must
    equal the closed-form center (-2 s2 / 5, -2 s1 / 5) and radius.

    Returns
    -------
    (center, r2)
    """
    es = edge_gauss_set(s_tilde)
    e_odd, e_even = es.eta[0::2], es.eta[1::2]
    rows = np.column_stack((e_odd + e_even, np.ones(4)))
    rhs = np.sum(e_odd * e_even, axis=1)
    sol, _, rank, sv = np.linalg.lstsq(rows, rhs, rcond=None)
    if rank < 3 or sv[-1] < 1e-12 * sv[0]:
        raise Degenerate("circle-center system is rank deficient")
    center = sol[:2]
    r2 = sol[2] + center @ center
    resid = rows @ sol - rhs
    if np.max(np.abs(resid)) > 1e-10:
        raise Degenerate(
            f"circle-center conditions inconsistent (residual {np.max(np.abs(resid)):.2e})"
        )
    return center, float(r2)


@dataclass(frozen=True)
class ParametricElement:
    """Reference-square element span{1, x1, x2, [x1*x2,] psi_l}.

    ``augmented`` adds x1*x2 together with the cell moment
    int_{Khat} v * x1 * x2 as a fifth degree of freedom; the mapped
    five-function space contains all linears on any straight-sided
    quadrilateral, which the four-function one does not.
    """

    variant_l: int = 1
    augmented: bool = True

    @property
    def ndofs(self):
        return 5 if self.augmented else 4


def parametric_basis_eval(el, xhat):
    """Raw span values and gradients at points on the reference square.

    Returns (values, gradients) with shapes (..., k) and (..., k, 2),
    order (1, x1, x2, [x1*x2,] psi_l).
    """
    xhat = np.asarray(xhat, dtype=float)
    base = xhat.shape[:-1]
    k = el.ndofs
    vals = np.empty(base + (k,))
    grads = np.zeros(base + (k, 2))
    x1, x2 = xhat[..., 0], xhat[..., 1]
    vals[..., 0] = 1.0
    vals[..., 1] = x1
    vals[..., 2] = x2
    grads[..., 1, 0] = 1.0
    grads[..., 2, 1] = 1.0
    if el.augmented:
        vals[..., 3] = x1 * x2
        grads[..., 3, 0] = x2
        grads[..., 3, 1] = x1
    vals[..., k - 1] = psi_hat(xhat, el.variant_l)
    grads[..., k - 1, :] = psi_hat_grad(xhat, el.variant_l)
    return vals, grads


def parametric_nodal_matrix(el):
    """Nodal coefficients against the raw span; constant per variant.

    Degrees of freedom are the four midpoint values plus, when
    augmented, the moment int v * x1 * x2 over the reference square
    (x1*x2 is the only raw function with a nonzero moment, 4/9).
    Row i holds the coefficients of the basis function dual to DOF i.
    """
    k = el.ndofs
    vmat = np.zeros((k, k))  # vmat[f, dof] = DOF applied to raw function f
    vals, _ = parametric_basis_eval(el, REF_MIDPOINTS)
    vmat[:, :4] = vals.T
    if el.augmented:
        vmat[3, 4] = 4.0 / 9.0
    return np.linalg.inv(vmat)
