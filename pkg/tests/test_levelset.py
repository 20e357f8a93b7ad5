import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma

from isounfitted import (
    DegenerateLevelSet,
    build_structured_mesh,
    classify_cut,
    gamma_lin_measure,
    interpolate_levelset,
    refine_uniform,
)
from isounfitted.mesh import Mesh


def one_triangle():
    return Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))


def p1_levelset(values):
    m = one_triangle()
    vals = np.asarray(values, dtype=float)

    def phi(x):  # affine through the vertex values
        return vals[0] + (vals[1] - vals[0]) * x[:, 0] + (vals[2] - vals[0]) * x[:, 1]

    return m, interpolate_levelset(phi, m, 1)


def perimeter_norm4():
    # 8 copies of the arc x = (1 - t^4)^(1/4), y = t, t in [0, 2^(-1/4)]
    def speed(t):
        dx = -t**3 * (1 - t**4) ** -0.75
        return np.sqrt(1 + dx * dx)

    val, _ = quad(speed, 0.0, 2 ** -0.25, epsabs=1e-14, epsrel=1e-14, limit=200)
    return 8 * val


def test_uncut_triangle():
    m, ls = p1_levelset([1, 1, 1])
    ct = classify_cut(ls, m)
    assert ct.n_cut == 0 and ct.elem_sign[0] == 1
    assert gamma_lin_measure(ct) == 0.0


def test_lone_vertex_cut_at_midpoints():
    m, ls = p1_levelset([-1, 1, 1])
    ct = classify_cut(ls, m)
    assert ct.n_cut == 1
    ends = sorted(map(tuple, ct.segments[0]))
    assert np.allclose(ends, [(0.0, 0.5), (0.5, 0.0)])
    # negative corner: 1/4 of the reference triangle area 1/2
    assert np.isclose(ct.side_areas[0, 0], 0.125)
    assert np.isclose(ct.side_areas[0].sum(), 0.5)
    assert np.allclose(ct.normals[0], [1 / np.sqrt(2), 1 / np.sqrt(2)])


@pytest.mark.parametrize("k", [1, 2, 4])
def test_affine_levelset_exact(k):
    m = build_structured_mesh((0, 1, 0, 1), 4)
    ls = interpolate_levelset(lambda x: x[:, 0] - 0.3, m, k)
    assert np.allclose(ls.nodal_values, ls.space.node_coords[:, 0] - 0.3, atol=1e-15)
    pts = np.array([[0.2, 0.2], [0.7, 0.1]])
    for t in range(m.n_elements):
        X = np.array([m.affine_map(t, p) for p in pts])
        assert np.allclose(ls.evaluate(t, pts), X[:, 0] - 0.3, atol=1e-14)
    assert np.array_equal(ls.p1_values, ls.nodal_values[: m.n_vertices])


def test_straight_interface_length_and_cut_invariants():
    m = build_structured_mesh((0, 1, 0, 1), 5)
    ls = interpolate_levelset(lambda x: x[:, 0] - 0.5 + 0.013, m, 2)
    ct = classify_cut(ls, m)
    assert abs(gamma_lin_measure(ct) - 1.0) < 1e-12
    A, b = m.jacobians(ct.cut_elements)
    vmax = np.abs(ls.p1_values).max()
    for r, t in enumerate(ct.cut_elements):
        v = ls.p1_values[m.elements[t]]
        for P in list(ct.segments[r]) + [ct.segments[r].mean(axis=0)]:
            lam = np.array([1 - P.sum(), P[0], P[1]])
            assert abs(lam @ v) <= 1e-12 * vmax
        # sub-triangle sign consistency at centroids
        for tri, s in zip(ct.subtris[r], ct.subside[r]):
            c = tri.mean(axis=0)
            val = np.array([1 - c.sum(), c[0], c[1]]) @ v
            assert (val < 0) == (s == 1)
    areas = m.signed_areas()[ct.cut_elements]
    assert np.allclose(ct.side_areas.sum(axis=1), areas, rtol=1e-12)


def test_band_contains_cut_and_neighbours(bench):
    m = build_structured_mesh(bench.box, 8)
    ct = classify_cut(interpolate_levelset(bench.phi, m, 1), m)
    assert set(ct.cut_elements) <= set(ct.extended_band)
    touch = ct.band_vertices()[m.elements].any(axis=1)
    assert np.array_equal(np.flatnonzero(touch), ct.extended_band)


def test_cut_count_matches_sign_sampling(bench):
    m = build_structured_mesh(bench.box, 8)
    ls = interpolate_levelset(bench.phi, m, 1)
    ct = classify_cut(ls, m)
    lam = np.random.default_rng(0).dirichlet([1, 1, 1], 1000)
    lam = np.vstack([lam, np.eye(3)])
    v = ls.p1_values[m.elements]
    vals = v @ lam.T
    sampled = (vals.min(axis=1) < 0) & (vals.max(axis=1) > 0)
    assert sampled.sum() == ct.n_cut


def test_levelset_interpolation_order(bench):
    m = build_structured_mesh(bench.box, 8)
    pts = np.random.default_rng(3).dirichlet([1, 1, 1], 100)[:, 1:]
    for k in (1, 2, 3):
        errs = []
        mm = m
        for _ in range(4):
            ls = interpolate_levelset(bench.phi, mm, k)
            ct = classify_cut(ls, mm)
            A, b = mm.jacobians(ct.cut_elements)
            X = np.einsum("tij,qj->tqi", A, pts) + b[:, None]
            ph = np.einsum("qn,tn->tq", ls.space.ref.values(pts), ls.element_values(ct.cut_elements))
            errs.append(np.abs(ph - bench.phi(X.reshape(-1, 2)).reshape(ph.shape)).max())
            mm = refine_uniform(mm)
        assert np.log2(errs[-2] / errs[-1]) >= k + 1 - 0.3


def test_gamma_lin_length_converges_to_perimeter(bench):
    P = perimeter_norm4()
    m = build_structured_mesh(bench.box, 8)
    errs = []
    for _ in range(4):
        ct = classify_cut(interpolate_levelset(bench.phi, m, 1), m)
        errs.append(abs(gamma_lin_measure(ct) - P))
        m = refine_uniform(m)
    assert errs[-1] < errs[0]
    assert np.log2(errs[-2] / errs[-1]) >= 2 - 0.3


def test_perimeter_oracle_sanity():
    # |Omega_1| closed form and a polygon check of the parametric perimeter
    th = np.linspace(0, 2 * np.pi, 200001)
    r = (np.cos(th) ** 4 + np.sin(th) ** 4) ** -0.25
    X = np.column_stack([r * np.cos(th), r * np.sin(th)])
    poly = np.linalg.norm(np.diff(X, axis=0), axis=1).sum()
    assert abs(poly - perimeter_norm4()) < 1e-8
    area = 0.5 * np.sum(X[:-1, 0] * X[1:, 1] - X[1:, 0] * X[:-1, 1])
    assert abs(area - 4 * gamma(1.25) ** 2 / gamma(1.5)) < 1e-8


def test_vertex_snapping():
    m = build_structured_mesh((0, 1, 0, 1), 4)
    ls = interpolate_levelset(lambda x: x[:, 0] - 0.5, m, 2)
    assert ls.snapped.sum() == 5
    assert np.all(ls.p1_values[ls.snapped] > 0)
    ct = classify_cut(ls, m)
    assert ct.n_cut > 0 and np.all(np.isfinite(ct.segments))


def test_degenerate_and_nonfinite():
    m = build_structured_mesh((0, 1, 0, 1), 2)
    with pytest.raises(DegenerateLevelSet):
        classify_cut(interpolate_levelset(lambda x: 0.0 * x[:, 0], m, 1), m)
    with pytest.raises(ValueError):
        interpolate_levelset(lambda x: np.where(x[:, 0] > 0, x[:, 0], np.nan), m, 1)
