"""Model problems on the unit square with closed-form solutions.

All three problems have homogeneous Dirichlet data on (0,1)^2 and a
forcing derived analytically from the exact solution:

* Poisson:      -Lap u = f,  u = sin(pi x1) sin(pi x2).
* Stokes:       -Lap u + grad p = f, div u = 0, with a divergence-free
                exponential-polynomial velocity and
                p = -sin(2 pi x1) sin(2 pi x2).
* Elasticity:   -(lam + mu) grad(div u) - mu Lap u = f, a rotational
                field plus a gradient part scaled by 1/(1 + lam) so the
                solution stays bounded as lam -> infinity (locking test).

Callables are vectorized over (..., 2) point arrays; velocity-valued
functions return (..., 2) and velocity gradients (..., 2, 2) with
entry [i, j] = d u_i / d x_j.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import BadParam


@dataclass(frozen=True)
class Problem:
    kind: str
    ncomp: int
    u: Callable
    grad_u: Callable
    f: Callable
    p: Optional[Callable] = None
    mu: float = 1.0
    lam: float = 1.0


def _poisson():
    pi = np.pi

    def u(x):
        return np.sin(pi * x[..., 0]) * np.sin(pi * x[..., 1])

    def grad_u(x):
        s1 = np.sin(pi * x[..., 0])
        c1 = np.cos(pi * x[..., 0])
        s2 = np.sin(pi * x[..., 1])
        c2 = np.cos(pi * x[..., 1])
        return pi * np.stack((c1 * s2, s1 * c2), axis=-1)

    def f(x):
        return 2.0 * pi ** 2 * np.sin(pi * x[..., 0]) * np.sin(pi * x[..., 1])

    return Problem(kind="poisson", ncomp=1, u=u, grad_u=grad_u, f=f)


# Polynomial factors of the Stokes velocity; G = g + g' and k = 2K + K'
# make the field divergence-free.
def _g(t):
    return t ** 4 - 2.0 * t ** 3 + t ** 2


def _dg(t):
    return 4.0 * t ** 3 - 6.0 * t ** 2 + 2.0 * t


def _ddg(t):
    return 12.0 * t ** 2 - 12.0 * t + 2.0


def _dddg(t):
    return 24.0 * t - 12.0


def _stokes():
    pi = np.pi

    def parts(x):
        x1 = x[..., 0]
        x2 = x[..., 1]
        E = np.exp(x1 + 2.0 * x2)
        g, dg, ddg = _g(x1), _dg(x1), _ddg(x1)
        K, dK, ddK = _g(x2), _dg(x2), _ddg(x2)
        k = 2.0 * K + dK
        dk = 2.0 * dK + ddK
        G = g + dg
        dG = dg + ddg
        return x1, x2, E, g, dg, ddg, K, dK, ddK, k, dk, G, dG

    def u(x):
        _, _, E, g, _, _, K, _, _, k, _, G, _ = parts(x)
        return np.stack((E * g * k, -E * G * K), axis=-1)

    def grad_u(x):
        _, _, E, g, dg, _, K, dK, _, k, dk, G, dG = parts(x)
        d1u1 = E * (g + dg) * k
        d2u1 = E * (2.0 * k + dk) * g
        d1u2 = -E * (G + dG) * K
        d2u2 = -E * (2.0 * K + dK) * G
        out = np.empty(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = d1u1
        out[..., 0, 1] = d2u1
        out[..., 1, 0] = d1u2
        out[..., 1, 1] = d2u2
        return out

    def p(x):
        return -np.sin(2.0 * pi * x[..., 0]) * np.sin(2.0 * pi * x[..., 1])

    def f(x):
        x1, x2, E, g, dg, ddg, K, dK, ddK, k, dk, G, dG = parts(x)
        dddg1 = _dddg(x1)
        dddg2 = _dddg(x2)
        ddk = 2.0 * ddK + dddg2
        ddG = ddg + dddg1
        lap_u1 = E * (g + 2.0 * dg + ddg) * k + E * (4.0 * k + 4.0 * dk + ddk) * g
        lap_u2 = -(E * (G + 2.0 * dG + ddG) * K + E * (4.0 * K + 4.0 * dK + ddK) * G)
        gp1 = -2.0 * pi * np.cos(2.0 * pi * x1) * np.sin(2.0 * pi * x2)
        gp2 = -2.0 * pi * np.sin(2.0 * pi * x1) * np.cos(2.0 * pi * x2)
        return np.stack((-lap_u1 + gp1, -lap_u2 + gp2), axis=-1)

    return Problem(kind="stokes", ncomp=2, u=u, grad_u=grad_u, f=f, p=p)


def _elasticity(mu, lam):
    pi = np.pi
    a = 1.0 / (1.0 + lam)

    def u(x):
        x1 = x[..., 0]
        x2 = x[..., 1]
        w = np.sin(pi * x1) * np.sin(pi * x2)
        u1 = np.sin(2.0 * pi * x2) * (np.cos(2.0 * pi * x1) - 1.0) + a * w
        u2 = -np.sin(2.0 * pi * x1) * (np.cos(2.0 * pi * x2) - 1.0) + a * w
        return np.stack((u1, u2), axis=-1)

    def grad_u(x):
        x1 = x[..., 0]
        x2 = x[..., 1]
        s1, c1 = np.sin(2.0 * pi * x1), np.cos(2.0 * pi * x1)
        s2, c2 = np.sin(2.0 * pi * x2), np.cos(2.0 * pi * x2)
        ws1, wc1 = np.sin(pi * x1), np.cos(pi * x1)
        ws2, wc2 = np.sin(pi * x2), np.cos(pi * x2)
        out = np.empty(x.shape[:-1] + (2, 2))
        out[..., 0, 0] = -2.0 * pi * s1 * s2 + a * pi * wc1 * ws2
        out[..., 0, 1] = 2.0 * pi * c2 * (c1 - 1.0) + a * pi * ws1 * wc2
        out[..., 1, 0] = -2.0 * pi * c1 * (c2 - 1.0) + a * pi * wc1 * ws2
        out[..., 1, 1] = 2.0 * pi * s1 * s2 + a * pi * ws1 * wc2
        return out

    def f(x):
        x1 = x[..., 0]
        x2 = x[..., 1]
        s1, c1 = np.sin(2.0 * pi * x1), np.cos(2.0 * pi * x1)
        s2, c2 = np.sin(2.0 * pi * x2), np.cos(2.0 * pi * x2)
        w = np.sin(pi * x1) * np.sin(pi * x2)
        ddiv = pi ** 2 * a * (
            np.cos(pi * x1) * np.cos(pi * x2) - np.sin(pi * x1) * np.sin(pi * x2)
        )
        lap_u1 = -4.0 * pi ** 2 * s2 * (2.0 * c1 - 1.0) - 2.0 * a * pi ** 2 * w
        lap_u2 = 4.0 * pi ** 2 * s1 * (2.0 * c2 - 1.0) - 2.0 * a * pi ** 2 * w
        f1 = -(lam + mu) * ddiv - mu * lap_u1
        f2 = -(lam + mu) * ddiv - mu * lap_u2
        return np.stack((f1, f2), axis=-1)

    return Problem(kind="elasticity", ncomp=2, u=u, grad_u=grad_u, f=f,
                   mu=mu, lam=lam)


def exact_problem(kind, mu=1.0, lam=1.0):
    """Problem definition with exact solution, gradient and forcing."""
    if kind == "poisson":
        return _poisson()
    if kind == "stokes":
        return _stokes()
    if kind == "elasticity":
        if mu <= 0 or lam <= 0:
            raise BadParam(f"need mu, lam > 0, got mu={mu}, lam={lam}")
        return _elasticity(float(mu), float(lam))
    raise BadParam(f"unknown problem kind {kind!r}")
