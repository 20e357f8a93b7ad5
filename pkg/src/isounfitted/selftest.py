"""Small-scale invariant checks of every module, runnable from the CLI."""
from __future__ import annotations

from math import factorial

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from .benchmark import planar_patch, smoothed_square
from .config import RunConfig
from .deform import build_theta, lenoir_extend_edge, search_direction
from .exceptions import IsoUnfittedError
from .fe import build_unfitted_space
from .levelset import classify_cut, interpolate_levelset
from .mesh import build_structured_mesh
from .nitsche import assemble, inverse_constant, inverse_estimate_sup
from .quadrature import MAX_DEGREE, segment_rule, triangle_rule


def triangle_monomial(a: int, b: int) -> float:
    """Integral of x^a y^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def check_quadrature(rule_degree=None):
    """Each nominal degree D must integrate all monomials of degree <= D.

    ``rule_degree`` forces the rule actually used (for tamper tests).
    """
    worst = 0.0
    for D in range(MAX_DEGREE + 1):
        tri = triangle_rule(D if rule_degree is None else min(rule_degree, D))
        seg = segment_rule(D if rule_degree is None else min(rule_degree, D))
        x, y = tri.points.T
        for a in range(D + 1):
            worst = max(worst, abs(seg.weights @ seg.points**a - 1.0 / (a + 1)) * (a + 1))
            for b in range(D + 1 - a):
                exact = triangle_monomial(a, b)
                worst = max(worst, abs(tri.weights @ (x**a * y**b) - exact) / exact)
    return worst <= 1e-12, f"max relative error {worst:.2e}"


def check_lenoir(kmax: int = 6, seed: int = 0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    t = np.linspace(0.0, 1.0, 10)
    V = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    for k in range(2, kmax + 1):
        tk = np.linspace(0.0, 1.0, k + 1)
        for e in range(3):
            a, b = (e + 1) % 3, (e + 2) % 3
            w = np.concatenate([[0.0], rng.standard_normal(k - 1), [0.0]])
            on_edge = (1 - t)[:, None] * V[a] + t[:, None] * V[b]
            ext = lenoir_extend_edge(w, k, e, on_edge)
            ref = BarycentricInterpolator(tk, w)(t)
            worst = max(worst, np.max(np.abs(ext - ref)))
            for other in ((e + 1) % 3, (e + 2) % 3):
                p, q = (other + 1) % 3, (other + 2) % 3
                pts = (1 - t)[:, None] * V[p] + t[:, None] * V[q]
                worst = max(worst, np.max(np.abs(lenoir_extend_edge(w, k, e, pts))))
            lin = rng.standard_normal(2)
            inner = rng.random((10, 2)) * 0.5
            worst = max(worst, np.max(np.abs(
                lenoir_extend_edge(lin[0] + lin[1] * tk, k, e, inner, check_ends=False))))
    return worst <= 1e-13, f"max deviation {worst:.2e}"


def _setup(problem, k, n):
    m = build_structured_mesh(problem.box, n)
    ls = interpolate_levelset(problem.phi, m, k)
    ct = classify_cut(ls, m)
    gh = search_direction(ls, ct)
    d = build_theta(ls, gh, ct)
    return m, ls, ct, d


def check_affine(k: int = 3):
    _, _, _, d = _setup(planar_patch(), k, 5)
    dev = float(np.max(np.abs(d.disp)))
    return dev <= 1e-13, f"max displacement {dev:.2e}"


def check_vertex_steps(k: int = 2):
    _, _, _, d = _setup(smoothed_square(), k, 8)
    dev = float(np.max(np.abs(d.theta_gamma.step[:, :3])))
    return dev <= 1e-13, f"max |d_h| at vertices {dev:.2e}"


def check_coercivity(lambda_factor: float = 20.0, k: int = 1):
    from .solver import solve_system

    pb = smoothed_square(lambda_factor=lambda_factor)
    m, _, ct, d = _setup(pb, k, 8)
    V = build_unfitted_space(m, ct, k)
    try:
        _, rep = solve_system(assemble(V, d, ct, pb.data), require_positive=True)
    except IsoUnfittedError as exc:
        return False, f"{type(exc).__name__}: {exc}"
    return True, f"min pivot {rep.min_pivot:.2e}, residual {rep.residual:.1e}"


def check_patch(ks=(1, 2)):
    from .experiment import solve_level

    worst = 0.0
    pb = planar_patch()
    for k in ks:
        res = solve_level(pb, build_structured_mesh(pb.box, 4), k, RunConfig())
        worst = max(worst, res.errors.e_H1)
    return worst <= 1e-9, f"max e_H1 {worst:.2e}"


def check_inverse(ks=(1, 2, 3)):
    pb = smoothed_square()
    worst = 0.0
    for k in ks:
        m, _, ct, _ = _setup(pb, k, 8)
        V = build_unfitted_space(m, ct, k)
        c = inverse_constant(k)
        for t in ct.cut_elements:
            for s in (1, 2):
                worst = max(worst, inverse_estimate_sup(V, ct, t, s) / c)
    return worst <= 1.0, f"max ratio / c_kd {worst:.3f}"


def self_test(lambda_factor: float = 20.0, quad_degree: int | None = None):
    """Run all checks; returns ``(ok, [(name, ok, detail), ...])``."""
    checks = [
        ("quadrature exactness", lambda: check_quadrature(quad_degree)),
        ("edge extension identities", check_lenoir),
        ("affine level set gives identity", check_affine),
        ("step length zero at vertices", check_vertex_steps),
        ("coercivity (positive pivots)", lambda: check_coercivity(lambda_factor)),
        ("planar patch test", check_patch),
        ("trace inverse estimate", check_inverse),
    ]
    results = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return all(r[1] for r in results), results
