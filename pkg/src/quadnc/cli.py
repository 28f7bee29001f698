"""Command line interface.

Subcommands: ``mesh`` (generate and save a mesh), ``solve`` (single
solve with error report), ``study`` (refinement study, CSV or
Markdown), ``timing`` (element timing ratios), ``verify`` (property
suite).  Exit codes: 0 success, 1 solver/verification failure, 2 bad
arguments.
"""

import argparse
import sys

from .bench import (
    StudyConfig,
    convergence_study,
    error_norms,
    make_element,
    make_mesh,
    pressure_error,
    rows_to_csv,
    rows_to_markdown,
    solve_problem,
    timing_ratio,
)
from .errors import QuadncError
from .mesh import save_mesh
from .problems import exact_problem


def _add_mesh_args(p):
    p.add_argument("--mesh", choices=("theta", "random"), default="theta")
    p.add_argument("--theta", type=float, default=0.7)
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=1)


def _add_solve_args(p):
    p.add_argument("--problem", choices=("poisson", "stokes", "elasticity"),
                   default="poisson")
    _add_mesh_args(p)
    p.add_argument("--element", choices=("np", "p"), default="np")
    p.add_argument("--ctilde", type=float, default=0.0)
    p.add_argument("--l", dest="variant", type=int, choices=(1, 2), default=1)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--quad", type=int, default=5)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "md"), default="csv")


def build_parser():
    ap = argparse.ArgumentParser(prog="quadnc", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    pm = sub.add_parser("mesh", help="generate a mesh and write it to a file")
    pm.add_argument("--kind", choices=("theta", "random"), required=True)
    pm.add_argument("--n", type=int, required=True)
    pm.add_argument("--theta", type=float, default=0.7)
    pm.add_argument("--alpha", type=float, default=0.25)
    pm.add_argument("--seed", type=int, default=1)
    pm.add_argument("--out", required=True)

    ps = sub.add_parser("solve", help="solve one problem instance")
    ps.add_argument("--n", type=int, default=16)
    _add_solve_args(ps)

    pc = sub.add_parser("study", help="run a refinement study")
    pc.add_argument("--levels", default="4,8,16,32,64,128",
                    help="comma-separated 1/h values")
    _add_solve_args(pc)

    pt = sub.add_parser("timing", help="element timing ratio t(np)/t(p)")
    pt.add_argument("--levels", default="32,64")
    pt.add_argument("--families", default="theta,random")
    pt.add_argument("--theta", type=float, default=0.7)
    pt.add_argument("--alpha", type=float, default=0.25)
    pt.add_argument("--seed", type=int, default=1)
    pt.add_argument("--ctilde", type=float, default=0.0)
    pt.add_argument("--quad", type=int, default=5)
    pt.add_argument("--repeats", type=int, default=3)

    sub.add_parser("verify", help="run the property suites")
    return ap


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_mesh(args):
    mesh = make_mesh(args.kind, args.n, theta=args.theta, alpha=args.alpha,
                     seed=args.seed)
    save_mesh(mesh, args.out)
    print(f"wrote {args.out}: {mesh.n_nodes} nodes, {mesh.n_cells} cells, "
          f"{mesh.n_interior_edges} interior edges")
    return 0


def cmd_solve(args):
    mesh = make_mesh(args.mesh, args.n, theta=args.theta, alpha=args.alpha,
                     seed=args.seed)
    element = make_element(args.element, ctilde=args.ctilde, variant=args.variant)
    problem = exact_problem(args.problem, mu=args.mu, lam=args.lam)
    res = solve_problem(mesh, element, problem, quad_npts=args.quad, tol=args.tol)
    l2, h1 = error_norms(mesh, element, res.u_full, problem,
                         quad_npts=args.quad + 1)
    if problem.kind == "stokes":
        h1 = pressure_error(mesh, element, res.pressure, problem,
                            quad_npts=args.quad + 1)
    print(f"dofs={res.n_dofs}")
    print(f"err_l2={l2:.4e}")
    print(f"err_h1={h1:.4e}")
    if res.iterations >= 0:
        print(f"iters={res.iterations}")
    if args.out:
        header = "h,dof,err_l2,ratio_l2,err_h1,ratio_h1\n"
        row = f"{1.0 / args.n:.10g},{res.n_dofs},{l2:.4e},,{h1:.4e},\n"
        _emit(header + row, args.out)
    return 0


def cmd_study(args):
    levels = tuple(int(s) for s in args.levels.split(","))
    config = StudyConfig(
        problem=args.problem, mesh_family=args.mesh, theta=args.theta,
        alpha=args.alpha, seed=args.seed, element=args.element,
        ctilde=args.ctilde, variant=args.variant, mu=args.mu, lam=args.lam,
        quad_npts=args.quad, tol=args.tol, levels=levels,
    )
    rows = convergence_study(config)
    second = "pressure L2" if args.problem == "stokes" else "broken H1"
    text = rows_to_csv(rows) if args.format == "csv" else rows_to_markdown(
        rows, second_col=second)
    _emit(text, args.out)
    return 0


def cmd_timing(args):
    levels = tuple(int(s) for s in args.levels.split(","))
    families = tuple(args.families.split(","))
    ratios = timing_ratio(levels=levels, families=families, theta=args.theta,
                          alpha=args.alpha, seed=args.seed, ctilde=args.ctilde,
                          quad_npts=args.quad, repeats=args.repeats)
    print("family,h,ratio_np_over_p")
    for family, rows in ratios.items():
        for h, ratio in rows:
            print(f"{family},{h:.10g},{ratio:.4f}")
    return 0


def cmd_verify(_args):
    from .verify import run_all

    return 0 if run_all(verbose=True) else 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {
        "mesh": cmd_mesh,
        "solve": cmd_solve,
        "study": cmd_study,
        "timing": cmd_timing,
        "verify": cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except QuadncError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
