"""Nonconforming quadrilateral finite elements with edge-midpoint DOFs.

Two element families on general convex quadrilateral meshes: a
four-DOF nonparametric family built on an intermediate quadrilateral
(polynomial in physical coordinates, mean-value property on every
edge), and the classical parametric family on the reference square
(augmented with a condensed cell moment on non-rectangles).  Benchmark
drivers reproduce convergence tables for Poisson, Stokes and planar
linear elasticity, plus an assembly/solve timing comparison.
"""

from . import backend
from .assembly import (
    Element,
    SparseSystem,
    assemble,
    build_dofmap,
    interpolate_midpoints,
    nonparametric,
    parametric,
    recover_full,
    static_condense,
)
from .bench import (
    ConvergenceRow,
    StudyConfig,
    convergence_study,
    error_norms,
    pressure_error,
    solve_problem,
    timing_ratio,
)
from .geometry import (
    BilinearDecomposition,
    convexity_margin,
    decompose,
    forward_map,
    jacobian,
)
from .linsolve import CsrMatrix, solve_saddle, solve_spd
from .mesh import Mesh, build_topology, load_mesh, random_mesh, save_mesh, theta_mesh
from .problems import Problem, exact_problem
from .quadrature import edge_mean, gauss1d, tensor_rule
from .refelem import (
    NonparametricElement,
    ParametricElement,
    circle_center_check,
    mean_value_residual,
    mu_tilde,
    nodal_basis,
    phi,
    psi_hat,
    unisolvency_det,
)

__version__ = "0.1.0"
