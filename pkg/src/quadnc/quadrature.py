"""Gauss-Legendre rules on [-1,1], the reference square, and segments."""

from dataclasses import dataclass

import numpy as np

from .errors import BadParam

MAX_POINTS = 10


@dataclass(frozen=True)
class Rule1D:
    nodes: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class Rule2D:
    points: np.ndarray   # (npts^2, 2) on [-1,1]^2
    weights: np.ndarray  # sums to 4


def gauss1d(npts):
    """Gauss-Legendre rule with ``npts`` points on [-1,1].

    Nodes are computed by Newton iteration on the Legendre polynomial
    (recurrence evaluation), converged to ~1e-15; weights via
    2 / ((1 - x^2) P_n'(x)^2).  Exact for polynomials of degree
    2*npts - 1.  The 3-point rule has nodes (-sqrt(3/5), 0, sqrt(3/5))
    and weights (5/9, 8/9, 5/9).
    """
    if not isinstance(npts, (int, np.integer)) or not 1 <= npts <= MAX_POINTS:
        raise BadParam(f"npts must be an integer in [1, {MAX_POINTS}], got {npts!r}")
    n = int(npts)
    if n == 1:
        return Rule1D(nodes=np.zeros(1), weights=np.full(1, 2.0))
    # Chebyshev-like initial guesses, then Newton on P_n.
    k = np.arange(n)
    x = np.cos(np.pi * (k + 0.75) / (n + 0.5))
    for _ in range(100):
        p_prev = np.ones_like(x)
        p = x.copy()
        for m in range(2, n + 1):
            p_prev, p = p, ((2 * m - 1) * x * p - (m - 1) * p_prev) / m
        dp = n * (x * p - p_prev) / (x * x - 1.0)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    # Recompute derivative at the converged nodes for the weights.
    p_prev = np.ones_like(x)
    p = x.copy()
    for m in range(2, n + 1):
        p_prev, p = p, ((2 * m - 1) * x * p - (m - 1) * p_prev) / m
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return Rule1D(nodes=x[order], weights=w[order])


def tensor_rule(npts):
    """Tensor-product Gauss rule on [-1,1]^2; weights sum to 4."""
    r = gauss1d(npts)
    x1, x2 = np.meshgrid(r.nodes, r.nodes, indexing="ij")
    w1, w2 = np.meshgrid(r.weights, r.weights, indexing="ij")
    pts = np.column_stack((x1.ravel(), x2.ravel()))
    return Rule2D(points=pts, weights=(w1 * w2).ravel())


def edge_mean(f, a, b, npts=3):
    """Arc-length-normalized mean of ``f`` over the segment [a, b].

    The parametrization is affine, so the mean reduces to a plain Gauss
    average in the parameter; the segment length cancels.
    """
    r = gauss1d(npts)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = 0.5 * (r.nodes + 1.0)
    pts = a + t[:, None] * (b - a)
    vals = np.asarray([f(p) for p in pts], dtype=float)
    return 0.5 * float(r.weights @ vals)
