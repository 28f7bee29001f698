"""Benchmark driver: error norms, convergence studies, timing ratios.

Error reporting follows the convention of the convergence tables:
``err_l2`` is the L2 error of the primary field (scalar solution,
displacement, or velocity) and ``err_h1`` is the broken H1 seminorm of
that field, except for Stokes where the second column is the pressure
L2 error.  Ratios are log2(err(2h) / err(h)).
"""

import io
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import assembly, kernels
from .assembly import Element, nonparametric, parametric
from .errors import BadParam
from .linsolve import solve_saddle, solve_spd
from .mesh import random_mesh, theta_mesh
from .problems import Problem, exact_problem


def make_element(kind, ctilde=0.0, variant=1) -> Element:
    """Element from its CLI name: 'np' (nonparametric) or 'p' (parametric)."""
    if kind in ("np", "nonparametric"):
        return nonparametric(ctilde=ctilde)
    if kind in ("p", "parametric"):
        return parametric(variant=variant)
    raise BadParam(f"unknown element kind {kind!r}")


def make_mesh(family, n, theta=0.7, alpha=0.25, seed=1):
    if family == "theta":
        return theta_mesh(n, theta)
    if family == "random":
        return random_mesh(n, alpha=alpha, seed=seed)
    raise BadParam(f"unknown mesh family {family!r}")


def error_norms(mesh, element, u_full, problem, quad_npts=6):
    """(L2 error, broken-H1 seminorm error) of the primary field.

    Uses one more quadrature point per axis than assembly by default so
    the error integrals are not evaluated at the assembly points.
    """
    dofmap = assembly.build_dofmap(mesh, element)
    blocks = assembly.tabulate_blocks(mesh, element, quad_npts)
    ncomp = problem.ncomp
    l2_sq = 0.0
    h1_sq = 0.0
    for blk in blocks:
        dv = assembly.gather_local_dofs(mesh, dofmap, blk, ncomp, u_full)
        uh = np.einsum("cqi,cai->cqa", blk.V, dv, optimize=True)
        guh = np.einsum("cqid,cai->cqad", blk.G, dv, optimize=True)
        ue = np.asarray(problem.u(blk.X), dtype=float)
        if ncomp == 1:
            ue = ue[..., None]
        ge = np.asarray(problem.grad_u(blk.X), dtype=float)
        if ncomp == 1:
            ge = ge[..., None, :] if ge.ndim == 3 else ge
        diff = ue - uh
        l2_sq += float(np.einsum("cq,cqa->", blk.W, diff * diff, optimize=True))
        gdiff = ge - guh
        h1_sq += float(
            np.einsum("cq,cqad->", blk.W, gdiff * gdiff, optimize=True)
        )
    return np.sqrt(l2_sq), np.sqrt(h1_sq)


def pressure_error(mesh, element, p_cells, problem, quad_npts=6):
    """L2 error of a piecewise-constant pressure against problem.p."""
    blocks = assembly.tabulate_blocks(mesh, element, quad_npts)
    err_sq = 0.0
    for blk in blocks:
        pe = np.asarray(problem.p(blk.X), dtype=float)
        diff = pe - p_cells[blk.cells][:, None]
        err_sq += float(np.einsum("cq,cq->", blk.W, diff * diff))
    return np.sqrt(err_sq)


@dataclass
class SolveResult:
    u_full: np.ndarray
    pressure: Optional[np.ndarray]
    n_dofs: int
    iterations: int
    assemble_seconds: float
    solve_seconds: float


def solve_problem(mesh, element, problem, quad_npts=5, tol=1e-12,
                  saddle_tol=1e-10, maxit=50000):
    """Assemble and solve; returns the full DOF vector and timings.

    The reported DOF count matches the convergence tables: interior
    edge values (times components) plus cell moments for the parametric
    element, plus cell pressures minus one zero-mean constraint for
    Stokes.
    """
    t0 = time.perf_counter()
    system = assembly.assemble(mesh, element, problem, quad_npts=quad_npts)
    t1 = time.perf_counter()
    if problem.kind == "stokes":
        u, p = solve_saddle(
            system.A, system.B, system.rhs, system.g,
            tol=saddle_tol, inner_tol=tol, areas=system.areas,
        )
        t2 = time.perf_counter()
        u_full = assembly.recover_full(system, u)
        n = system.n_full + mesh.n_cells - 1
        return SolveResult(u_full, p, n, -1, t1 - t0, t2 - t1)
    from .linsolve import cg_jacobi

    x, iters, _ = cg_jacobi(system.A, system.rhs, tol=tol, maxit=maxit)
    t2 = time.perf_counter()
    u_full = assembly.recover_full(system, x)
    return SolveResult(u_full, None, system.n_full, iters, t1 - t0, t2 - t1)


@dataclass
class ConvergenceRow:
    h: float
    dof: int
    err_l2: float
    ratio_l2: Optional[float]
    err_h1: float
    ratio_h1: Optional[float]


@dataclass
class StudyConfig:
    problem: str = "poisson"
    mesh_family: str = "theta"
    theta: float = 0.7
    alpha: float = 0.25
    seed: int = 1
    element: str = "np"
    ctilde: float = 0.0
    variant: int = 1
    mu: float = 1.0
    lam: float = 1.0
    quad_npts: int = 5
    tol: float = 1e-12
    saddle_tol: float = 1e-10
    levels: tuple = (4, 8, 16, 32, 64, 128)


def convergence_study(config: StudyConfig):
    """Run all levels of a refinement study and tabulate errors/ratios."""
    problem = exact_problem(config.problem, mu=config.mu, lam=config.lam)
    element = make_element(config.element, ctilde=config.ctilde,
                           variant=config.variant)
    rows = []
    prev = None
    for n in config.levels:
        mesh = make_mesh(config.mesh_family, n, theta=config.theta,
                         alpha=config.alpha, seed=config.seed)
        res = solve_problem(mesh, element, problem,
                            quad_npts=config.quad_npts, tol=config.tol,
                            saddle_tol=config.saddle_tol)
        l2, h1 = error_norms(mesh, element, res.u_full, problem,
                             quad_npts=config.quad_npts + 1)
        if problem.kind == "stokes":
            h1 = pressure_error(mesh, element, res.pressure, problem,
                                quad_npts=config.quad_npts + 1)
        ratios = (None, None)
        if prev is not None:
            ratios = (np.log2(prev[0] / l2), np.log2(prev[1] / h1))
        rows.append(ConvergenceRow(
            h=1.0 / n, dof=res.n_dofs, err_l2=l2, ratio_l2=ratios[0],
            err_h1=h1, ratio_h1=ratios[1],
        ))
        prev = (l2, h1)
    return rows


def fit_rate(rows, attr="err_l2", h_range=None):
    """Least-squares slope of log(err) against log(h)."""
    hs = np.array([r.h for r in rows])
    errs = np.array([getattr(r, attr) for r in rows])
    if h_range is not None:
        keep = (hs >= h_range[0] - 1e-15) & (hs <= h_range[1] + 1e-15)
        hs, errs = hs[keep], errs[keep]
    slope, _ = np.polyfit(np.log(hs), np.log(errs), 1)
    return float(slope)


def rows_to_csv(rows):
    out = io.StringIO()
    out.write("h,dof,err_l2,ratio_l2,err_h1,ratio_h1\n")
    for r in rows:
        r2 = "" if r.ratio_l2 is None else f"{r.ratio_l2:.2f}"
        rh = "" if r.ratio_h1 is None else f"{r.ratio_h1:.2f}"
        out.write(f"{r.h:.10g},{r.dof},{r.err_l2:.4e},{r2},{r.err_h1:.4e},{rh}\n")
    return out.getvalue()


def rows_to_markdown(rows, second_col="broken H1"):
    out = io.StringIO()
    out.write(f"| h | DOF | L2 error | ratio | {second_col} | ratio |\n")
    out.write("|---|-----|----------|-------|---------|-------|\n")
    for r in rows:
        r2 = "-" if r.ratio_l2 is None else f"{r.ratio_l2:.2f}"
        rh = "-" if r.ratio_h1 is None else f"{r.ratio_h1:.2f}"
        out.write(
            f"| 1/{round(1 / r.h)} | {r.dof} | {r.err_l2:.4e} | {r2} "
            f"| {r.err_h1:.4e} | {rh} |\n"
        )
    return out.getvalue()


def time_pipeline(mesh, element, problem, quad_npts=5, tol=1e-12, repeats=3):
    """Median wall-clock seconds of assembly (basis construction and,
    for the parametric element, per-cell condensation included) plus
    linear solve.  Mesh generation and DOF numbering stay outside the
    timed region."""
    kernels.warmup()
    times = []
    for _ in range(repeats):
        res = solve_problem(mesh, element, problem, quad_npts=quad_npts, tol=tol)
        times.append(res.assemble_seconds + res.solve_seconds)
    return float(np.median(times))


def timing_ratio(levels=(32, 64), families=("theta", "random"), theta=0.7,
                 alpha=0.25, seed=1, ctilde=0.0, quad_npts=5, tol=1e-12,
                 repeats=3, numerator="np", denominator="p"):
    """Wall-clock ratio t(numerator)/t(denominator) per mesh level and family.

    Returns {family: [(h, ratio), ...]} for the Poisson problem, the
    setting of the published timing comparison.
    """
    problem = exact_problem("poisson")
    el_num = make_element(numerator, ctilde=ctilde)
    el_den = make_element(denominator, ctilde=ctilde)
    out = {}
    for family in families:
        rows = []
        for n in levels:
            mesh = make_mesh(family, n, theta=theta, alpha=alpha, seed=seed)
            t_num = time_pipeline(mesh, el_num, problem, quad_npts, tol, repeats)
            t_den = time_pipeline(mesh, el_den, problem, quad_npts, tol, repeats)
            rows.append((1.0 / n, t_num / t_den))
        out[family] = rows
    return out
