from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isounfitted import (
    BoundaryConflict,
    ProblemData,
    QuadConfig,
    assemble,
    averaging_weights,
    build_unfitted_space,
    classify_cut,
    interpolate_levelset,
    inverse_constant,
    inverse_estimate_probe,
    solve_direct,
    solve_system,
)
from isounfitted.deform import Deformation
from isounfitted.mesh import Mesh
from isounfitted.nitsche import heaviside_weights, inverse_estimate_sup

from conftest import setup_geometry


def test_averaging_weights_examples():
    assert averaging_weights(0.3, 1.0) == (0.0, 1.0)
    assert averaging_weights(0.7, 1.0) == (1.0, 0.0)
    assert averaging_weights(0.5, 1.0) == (1.0, 0.0)


@given(st.floats(1e-9, 1 - 1e-9))
def test_heaviside_stability_criterion(frac):
    k1, k2 = averaging_weights(frac, 1.0)
    assert k1 + k2 == 1.0
    assert k1**2 <= 2 * frac + 1e-15 and k2**2 <= 2 * (1 - frac) + 1e-15


def test_problem_data_validation():
    with pytest.raises(ValueError):
        ProblemData(alpha=(0.0, 1.0))
    with pytest.raises(ValueError):
        ProblemData(lambda_factor=-1.0)
    assert ProblemData().penalty(3) == 180.0
    assert QuadConfig().resolve(1) == QuadConfig(1, 2, 2)
    assert QuadConfig(stiffness=7).resolve(3) == QuadConfig(7, 6, 6)


def test_inverse_constant_formula():
    assert np.isclose(inverse_constant(1), 24 * np.sqrt(2))
    assert np.isclose(inverse_constant(2, d=3), 2 * 6 * 2 * 5 * 3)


def _system(bench, k, n=8, **kw):
    m, ls, ct, d = setup_geometry(bench.phi, bench.box, n, k)
    V = build_unfitted_space(m, ct, k)
    pd = ProblemData(alpha=bench.data.alpha, f=bench.data.f, g_dirichlet=bench.data.g_dirichlet, **kw)
    return m, ct, d, V, assemble(V, d, ct, pd)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_symmetry_and_positive_pivots(bench, k):
    m, ct, d, V, sys_ = _system(bench, k)
    A = sys_.matrix
    asym = abs(A - A.T).max()
    assert asym <= 1e-12 * abs(A).sum(axis=1).max()
    u, rep = solve_system(sys_, require_positive=True)
    assert rep.min_pivot > 0 and rep.residual <= 1e-9
    # Galerkin residual against random test vectors on the free dofs
    Aff, bf, free = sys_.reduced()
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = rng.standard_normal(len(free))
        assert abs(v @ (Aff @ u[free]) - v @ bf) <= 1e-9 * np.linalg.norm(bf) * np.linalg.norm(v)


def test_doubling_lambda_keeps_definiteness(bench):
    *_, sys_ = _system(bench, 2, lambda_factor=40.0)
    Aff, bf, _ = sys_.reduced()
    assert solve_direct(Aff, bf, require_positive=True).min_pivot > 0


def test_tiny_lambda_loses_coercivity(bench):
    from isounfitted import FactorizationFailure

    *_, sys_ = _system(bench, 1, lambda_factor=0.01)
    with pytest.raises(FactorizationFailure):
        solve_system(sys_, require_positive=True)


def test_penalty_block_matches_rational_oracle():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    m = Mesh(verts, np.array([[0, 1, 2]]))
    vals = np.array([-1.0, 1.0, 3.0])  # lone vertex 0, cut at t = 1/2 and t = 1/4

    def phi(x):
        return vals[0] + (vals[1] - vals[0]) * x[:, 0] + (vals[2] - vals[0]) * x[:, 1]

    ls = interpolate_levelset(phi, m, 1)
    ct = classify_cut(ls, m)
    V = build_unfitted_space(m, ct, 1)
    d = Deformation.identity(ls.space)
    A1 = assemble(V, d, ct, ProblemData(alpha=(1.0, 1.0), lambda_factor=3.0)).matrix.toarray()
    A2 = assemble(V, d, ct, ProblemData(alpha=(1.0, 1.0), lambda_factor=1.0)).matrix.toarray()
    P = (A1 - A2) / 2.0  # penalty with lambda_factor = 1
    # exact: segment from (1/2, 0) to (0, 1/4); basis values at endpoints
    pa, pb = (Fraction(1, 2), Fraction(0)), (Fraction(0), Fraction(1, 4))

    def bary(p):
        return [1 - p[0] - p[1], p[0], p[1]]

    a, b = bary(pa), bary(pb)
    L2 = Fraction(1, 4) + Fraction(1, 16)
    h = np.sqrt(2.0)
    M = np.array([[float(a[i] * a[j] / 3 + (a[i] * b[j] + b[i] * a[j]) / 6 + b[i] * b[j] / 3) for j in range(3)]
                  for i in range(3)]) * np.sqrt(float(L2))
    coef = 1.0 * 1.0 / h  # alpha_mean * lambda * k^2 / h
    off = V.side_offset(2)
    assert np.allclose(P[:3, :3], coef * M, atol=1e-14)
    assert np.allclose(P[off:off + 3, off:off + 3], coef * M, atol=1e-14)
    assert np.allclose(P[:3, off:off + 3], -coef * M, atol=1e-14)


def test_boundary_conflict_detected(bench):
    m, ls, ct, d = setup_geometry(bench.phi, bench.box, 8, 2)
    V = build_unfitted_space(m, ct, 2)
    disp = d.disp.copy()
    disp[np.flatnonzero(ls.space.boundary_nodes)[0]] = [1e-3, 0.0]
    bad = Deformation(ls.space, disp, d.active_band)
    with pytest.raises(BoundaryConflict):
        assemble(V, bad, ct, bench.data)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_patch_test_reproduces_kinked_linear_solution(k):
    from isounfitted import planar_patch
    from isounfitted.experiment import solve_level
    from isounfitted.mesh import build_structured_mesh

    pb = planar_patch()
    res = solve_level(pb, build_structured_mesh(pb.box, 5), k)
    assert res.errors.e_H1 <= 1e-10
    assert np.abs(res.deformation.disp).max() == 0.0


def test_heaviside_weights_follow_undeformed_areas(bench_k2):
    _, _, ct, _ = bench_k2
    kap = heaviside_weights(ct)
    big1 = ct.side_areas[:, 0] >= 0.5 * ct.side_areas.sum(axis=1)
    assert np.array_equal(kap[:, 0] == 1.0, big1)
    assert np.all(kap.sum(axis=1) == 1.0)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_inverse_estimate_probe_bounded(bench, k):
    m, ls, ct, _ = setup_geometry(bench.phi, bench.box, 8, k)
    V = build_unfitted_space(m, ct, k)
    c = inverse_constant(k)
    rng = np.random.default_rng(k)
    worst = 0.0
    for t in ct.cut_elements[:12]:
        for s in (1, 2):
            probe = inverse_estimate_probe(V, ct, t, s, trials=50, rng=rng)
            sup = inverse_estimate_sup(V, ct, t, s)
            assert probe <= sup * (1 + 1e-10)
            worst = max(worst, probe)
    assert worst <= c
    with pytest.raises(ValueError):
        inverse_estimate_probe(V, ct, int(np.flatnonzero(ct.elem_sign == 1)[0]), 1)


def test_inverse_probe_constant_polynomial():
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    m = Mesh(verts, np.array([[0, 1, 2]]))
    ls = interpolate_levelset(lambda x: 0.6 - x[:, 0] - 0.1 * x[:, 1], m, 1)
    ct = classify_cut(ls, m)
    V = build_unfitted_space(m, ct, 1)
    # side 1 (phi < 0) is the lone vertex (1, 0) corner, smaller than half: kappa_1 = 0
    assert inverse_estimate_probe(V, ct, 0, 1) == 0.0
    from isounfitted.nitsche import _reference_cut_masses

    Mg, Mt, vol = _reference_cut_masses(ct, 0, 2, 1)
    one = np.ones(3)
    ratio = (one @ Mg @ one) / (one @ Mt @ one)
    assert np.isclose(ratio, ct.segment_lengths()[0] / ct.side_areas[0, 1], rtol=1e-12)
    assert ratio <= inverse_constant(1)
