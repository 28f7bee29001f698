"""Self-contained property suite behind the ``verify`` CLI subcommand.

Each check returns (name, passed, detail); the whole suite runs in well
under half a minute.  The same checks back the acceptance tests.
"""

import numpy as np

from . import assembly, geometry, refelem
from .bench import make_element, make_mesh
from .linsolve import cg_jacobi
from .mesh import theta_mesh
from .problems import Problem, exact_problem
from .quadrature import gauss1d


def _random_convex_s(rng, n, margin=0.05):
    """Distortion vectors with convexity margin above ``margin``."""
    out = np.empty((n, 2))
    have = 0
    while have < n:
        cand = rng.uniform(-1.0, 1.0, size=(2 * n, 2))
        good = cand[geometry.convexity_margin(cand) > margin]
        take = min(len(good), n - have)
        out[have:have + take] = good[:take]
        have += take
    return out


def check_mean_value_residuals(rng):
    s = _random_convex_s(rng, 1000)
    c = rng.uniform(-2.0, 2.0, size=1000)
    worst = 0.0
    for sv, cv in zip(s, c):
        worst = max(worst, float(np.max(np.abs(refelem.mean_value_residual(sv, cv)))))
    return worst <= 1e-12, f"max residual {worst:.2e}"


def check_mean_value_full_span(rng):
    """Edge means equal midpoint values for every function in the span,
    checked with 3-point Gauss on the intermediate-quad edges."""
    s = _random_convex_s(rng, 200)
    c = rng.uniform(-2.0, 2.0, size=200)
    rule = gauss1d(3)
    worst = 0.0
    for sv, cv in zip(s, c):
        tang = refelem.edge_tangents(sv)
        m = geometry.REF_MIDPOINTS
        pts = m[:, None, :] + rule.nodes[None, :, None] * tang[:, None, :]
        vals = refelem.shape_values(pts, sv, cv)          # (4, 3, 4)
        means = 0.5 * np.einsum("q,eqk->ek", rule.weights, vals)
        mid_vals = refelem.shape_values(m, sv, cv)
        worst = max(worst, float(np.max(np.abs(means - mid_vals))))
    return worst <= 1e-12, f"max |edge mean - midpoint value| {worst:.2e}"


def check_determinant_identity(rng):
    s = rng.uniform(-1.0, 1.0, size=(1000, 2))
    c = rng.uniform(-2.0, 2.0, size=1000)
    worst = 0.0
    for sv, cv in zip(s, c):
        num = np.linalg.det(refelem.vandermonde(sv, cv))
        closed = refelem.unisolvency_det(sv, cv)
        worst = max(worst, abs(num - closed) / (16.0 / 3.0))
    return worst <= 1e-12, f"max relative deviation {worst:.2e}"


def check_bubble_reduction():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1.0, 1.0, size=(25, 2))
    zero = np.zeros(2)
    diff = refelem.mu_tilde(pts, zero, 0.0) - refelem.psi_hat(pts, 1)
    worst = float(np.max(np.abs(diff)))
    return worst <= 1e-14, f"max |mu - psi_1| {worst:.2e}"


def check_circle_center(rng):
    s = _random_convex_s(rng, 100)
    worst = 0.0
    for sv in s:
        center, r2 = refelem.circle_center_check(sv)
        expected_c = np.array([-0.4 * sv[1], -0.4 * sv[0]])
        expected_r2 = refelem.radius_squared(sv)
        worst = max(
            worst,
            float(np.max(np.abs(center - expected_c))),
            abs(r2 - expected_r2),
        )
    return worst <= 1e-12, f"max deviation {worst:.2e}"


def check_gradients(rng):
    """Analytic gradients against central differences, step 1e-6."""
    pts = rng.uniform(-0.9, 0.9, size=(100, 2))
    s = np.array([0.25, 0.1])
    c = 1.0
    h = 1e-6
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    worst = 0.0
    for p in pts:
        fd = np.array([
            (refelem.mu_tilde(p + ex, s, c) - refelem.mu_tilde(p - ex, s, c)),
            (refelem.mu_tilde(p + ey, s, c) - refelem.mu_tilde(p - ey, s, c)),
        ]) / (2 * h)
        worst = max(worst, float(np.max(np.abs(fd - refelem.mu_tilde_grad(p, s, c)))))
        for l in (1, 2):
            fd = np.array([
                refelem.psi_hat(p + ex, l) - refelem.psi_hat(p - ex, l),
                refelem.psi_hat(p + ey, l) - refelem.psi_hat(p - ey, l),
            ]) / (2 * h)
            worst = max(worst, float(np.max(np.abs(fd - refelem.psi_hat_grad(p, l)))))
    return worst <= 1e-8, f"max FD deviation {worst:.2e}"


def check_partition_of_unity(rng):
    s = _random_convex_s(rng, 100)
    worst = 0.0
    for sv in s:
        el = refelem.nodal_basis(sv, rng.uniform(-2, 2))
        coeffs = el.nodal.sum(axis=0)
        worst = max(worst, float(np.max(np.abs(coeffs - np.array([1, 0, 0, 0])))))
    return worst <= 1e-12, f"max coefficient deviation {worst:.2e}"


def check_affine_pushforward(rng):
    """Edge mean equals midpoint value after arbitrary affine maps."""
    rule = gauss1d(3)
    worst = 0.0
    for _ in range(100):
        sv = _random_convex_s(rng, 1)[0]
        cv = rng.uniform(-2.0, 2.0)
        while True:
            T = rng.uniform(-2.0, 2.0, size=(2, 2))
            if abs(np.linalg.det(T)) > 0.2:
                break
        shift = rng.uniform(-1.0, 1.0, size=2)
        vt = geometry.intermediate_quad(sv)
        phys = vt @ T.T + shift                    # image quadrilateral
        Tinv = np.linalg.inv(T)

        def func(x):
            back = (x - shift) @ Tinv.T
            return refelem.mu_tilde(back, sv, cv)

        for j in range(4):
            a, b = phys[j - 1], phys[j]
            pts = 0.5 * (a + b) + 0.5 * rule.nodes[:, None] * (b - a)
            mean = 0.5 * float(rule.weights @ func(pts))
            mid = float(func(0.5 * (a + b)[None, :])[0])
            worst = max(worst, abs(mean - mid))
    return worst <= 1e-12, f"max |edge mean - midpoint| {worst:.2e}"


def check_map_composition(rng):
    """F equals the affine map of the simple map on random convex quads."""
    worst_comp = 0.0
    worst_vert = 0.0
    worst_jac = 0.0
    count = 0
    while count < 1000:
        v = geometry.REF_VERTICES + rng.uniform(-0.35, 0.35, size=(4, 2))
        try:
            dec = geometry.decompose(v)
        except Exception:
            continue
        if geometry.convexity_margin(dec.s_tilde) <= 0:
            continue
        count += 1
        xh = rng.uniform(-1.0, 1.0, size=(8, 2))
        direct = geometry.forward_map(dec, xh)
        composed = geometry.simple_map(xh, dec.s_tilde) @ dec.A.T + dec.b
        worst_comp = max(worst_comp, float(np.max(np.abs(direct - composed))))
        verts = geometry.forward_map(dec, geometry.REF_VERTICES)
        worst_vert = max(worst_vert, float(np.max(np.abs(verts - v))))
        mid = geometry.simple_map(geometry.REF_MIDPOINTS, dec.s_tilde)
        if np.max(np.abs(mid - geometry.REF_MIDPOINTS)) != 0.0:
            return False, "midpoints moved under the simple map"
        h = 1e-6
        p = xh[0]
        for dcol, step in ((0, np.array([h, 0.0])), (1, np.array([0.0, h]))):
            fd = (geometry.forward_map(dec, p + step)
                  - geometry.forward_map(dec, p - step)) / (2 * h)
            jac = geometry.jacobian(dec, p)[:, dcol]
            worst_jac = max(worst_jac, float(np.max(np.abs(fd - jac))))
    ok = worst_comp <= 1e-13 and worst_vert <= 1e-13 and worst_jac <= 1e-8
    return ok, (f"composition {worst_comp:.2e}, vertices {worst_vert:.2e}, "
                f"jacobian FD {worst_jac:.2e}")


def _linear_patch_problem():
    def u(x):
        return 3.0 * x[..., 0] - 2.0 * x[..., 1] + 1.0

    def grad_u(x):
        g = np.empty(x.shape[:-1] + (2,))
        g[..., 0] = 3.0
        g[..., 1] = -2.0
        return g

    def f(x):
        return np.zeros(x.shape[:-1])

    return Problem(kind="poisson", ncomp=1, u=u, grad_u=grad_u, f=f)


def check_patch_test():
    """Discrete harmonic extension of linear boundary data reproduces the
    linear interpolant on every mesh family and element kind."""
    problem = _linear_patch_problem()
    worst = 0.0
    cases = []
    for family, kwargs in (("theta", dict(theta=0.0)), ("theta", dict(theta=0.7)),
                           ("random", dict(alpha=0.25, seed=7))):
        for kind in ("np", "p"):
            mesh = make_mesh(family, 6, **kwargs)
            element = make_element(kind)
            system = assembly.assemble(mesh, element, problem, quad_npts=5,
                                       dirichlet=problem.u)
            x, _, _ = cg_jacobi(system.A, system.rhs, tol=1e-14, maxit=10000)
            full = assembly.recover_full(system, x)
            exact = assembly.interpolate_midpoints(mesh, element, problem.u)
            dev = float(np.max(np.abs(full - exact)))
            worst = max(worst, dev)
            cases.append(f"{family}{kwargs.get('theta', '')}-{kind}:{dev:.1e}")
    return worst <= 1e-10, f"max DOF deviation {worst:.2e}"


def check_symmetry():
    worst = 0.0
    for kind in ("np", "p"):
        for prob, params in (("poisson", {}), ("elasticity", dict(mu=1.0, lam=1e5))):
            mesh = theta_mesh(6, 0.7)
            problem = exact_problem(prob, **params)
            system = assembly.assemble(mesh, make_element(kind), problem)
            dense = system.A.todense()
            scale = np.abs(dense).max()
            worst = max(worst, float(np.abs(dense - dense.T).max()) / scale)
    return worst <= 1e-13, f"max relative asymmetry {worst:.2e}"


def check_mean_continuity():
    """Solved discrete functions have equal edge means from both sides of
    every interior edge (3-point Gauss)."""
    from .bench import solve_problem

    rule = gauss1d(3)
    # Reference-edge tangent directions (e1..e4 are vertical, horizontal,
    # vertical, horizontal segments of the reference square).
    dirs = np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    worst = 0.0
    problem = exact_problem("poisson")
    for kind in ("np", "p"):
        mesh = theta_mesh(8, 0.7)
        element = make_element(kind)
        res = solve_problem(mesh, element, problem, tol=1e-13)
        pts = (geometry.REF_MIDPOINTS[:, None, :]
               + rule.nodes[None, :, None] * dirs[:, None, :]).reshape(12, 2)
        vals = assembly.evaluate_discrete(mesh, element, res.u_full, pts)
        vals = vals.reshape(mesh.n_cells, 4, 3)
        means = 0.5 * np.einsum("q,cjq->cj", rule.weights, vals)
        side = {}
        for c in range(mesh.n_cells):
            for j in range(4):
                e = mesh.cell_edges[c, j]
                side.setdefault(e, []).append(means[c, j])
        for e, pair in side.items():
            if len(pair) == 2:
                worst = max(worst, abs(pair[0] - pair[1]))
    return worst <= 1e-10, f"max |mean jump| {worst:.2e}"


def check_divergence_free_interpolant():
    """Per-cell divergence integrals of an interpolated linear
    divergence-free field vanish."""
    def u(x):
        return np.stack((x[..., 0], -x[..., 1]), axis=-1)

    mesh = theta_mesh(6, 0.7)
    element = make_element("np")
    dofmap = assembly.build_dofmap(mesh, element)
    full = assembly.interpolate_midpoints(mesh, element, u, ncomp=2)
    blocks = assembly.tabulate_blocks(mesh, element, 5)
    worst = 0.0
    for blk in blocks:
        Bloc = assembly.divergence_rows(blk.G, blk.W)
        dv = assembly.gather_local_dofs(mesh, dofmap, blk, 2, full,
                                        dirichlet=u).reshape(len(blk.cells), -1)
        worst = max(worst, float(np.max(np.abs(np.einsum("ce,ce->c", Bloc, dv)))))
    return worst <= 1e-12, f"max |cell divergence| {worst:.2e}"


def check_forcing_consistency(rng):
    """Stored forcings match finite differences of the stored solutions."""
    h = 1e-5
    worst = 0.0
    pts = rng.uniform(0.1, 0.9, size=(100, 2))
    steps = (np.array([h, 0.0]), np.array([0.0, h]))

    def lap(func, x):
        out = -4.0 * func(x)
        for e in steps:
            out = out + func(x + e) + func(x - e)
        return out / h ** 2

    p_pois = exact_problem("poisson")
    fd = -lap(p_pois.u, pts)
    ref = p_pois.f(pts)
    worst = max(worst, float(np.max(np.abs(fd - ref)) / np.max(np.abs(ref))))

    p_st = exact_problem("stokes")
    grad_p = np.stack(
        [(p_st.p(pts + e) - p_st.p(pts - e)) / (2 * h) for e in steps], axis=-1
    )
    fd = -lap(p_st.u, pts) + grad_p
    ref = p_st.f(pts)
    worst = max(worst, float(np.max(np.abs(fd - ref)) / np.max(np.abs(ref))))

    for lam in (1.0, 1e5):
        p_el = exact_problem("elasticity", mu=1.0, lam=lam)

        def div(x):
            return sum(
                (p_el.u(x + steps[d])[..., d] - p_el.u(x - steps[d])[..., d])
                / (2 * h)
                for d in range(2)
            )

        grad_div = np.stack(
            [(div(pts + e) - div(pts - e)) / (2 * h) for e in steps], axis=-1
        )
        fd = -(p_el.lam + p_el.mu) * grad_div - p_el.mu * lap(p_el.u, pts)
        ref = p_el.f(pts)
        worst = max(worst, float(np.max(np.abs(fd - ref)) / np.max(np.abs(ref))))
    return worst <= 1e-5, f"max relative FD deviation {worst:.2e}"


def run_all(verbose=True):
    """Run every property check; returns True iff all passed."""
    rng = np.random.default_rng(42)
    checks = [
        ("mean-value residuals (1000 random cells)", check_mean_value_residuals, True),
        ("edge means equal midpoint values, full span", check_mean_value_full_span, True),
        ("unisolvency determinant identity", check_determinant_identity, True),
        ("bubble reduces to the square-cell function at s=0", check_bubble_reduction, False),
        ("circle center/radius closed form", check_circle_center, True),
        ("analytic gradients vs finite differences", check_gradients, True),
        ("partition of unity", check_partition_of_unity, True),
        ("mean value preserved by affine maps", check_affine_pushforward, True),
        ("bilinear map decomposition", check_map_composition, True),
        ("patch test: linear reproduction", check_patch_test, False),
        ("assembled matrix symmetry", check_symmetry, False),
        ("edge-mean continuity of discrete solutions", check_mean_continuity, False),
        ("divergence-free interpolant has zero cell divergence",
         check_divergence_free_interpolant, False),
        ("forcing consistency (finite differences)", check_forcing_consistency, True),
    ]
    all_ok = True
    for name, fn, needs_rng in checks:
        ok, detail = fn(rng) if needs_rng else fn()
        all_ok &= ok
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return all_ok
