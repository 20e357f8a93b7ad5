import numpy as np
import pytest
import scipy.sparse as sp

from isounfitted import FactorizationFailure, ResidualFailure, solve_direct, solve_system
from isounfitted.experiment import solve_level
from isounfitted.mesh import build_structured_mesh, refine_uniform


def test_identity():
    rep = solve_direct(sp.identity(4, format="csc"), np.eye(4)[0])
    assert np.array_equal(rep.solution, np.eye(4)[0]) and rep.residual == 0.0


def test_two_by_two_spd():
    rep = solve_direct(np.array([[2.0, 1.0], [1.0, 2.0]]), np.ones(2), estimate_condition=True)
    assert np.allclose(rep.solution, [1 / 3, 1 / 3], atol=1e-15)
    assert np.isclose(rep.condition_estimate, 3.0, rtol=1e-8)
    assert rep.min_pivot > 0


def test_singular_matrix_fails():
    with pytest.raises(FactorizationFailure):
        solve_direct(sp.csc_matrix(np.array([[1.0, 1.0], [1.0, 1.0]])), np.ones(2))


def test_indefinite_detected_only_on_request():
    A = np.array([[1.0, 0.0], [0.0, -2.0]])
    assert np.allclose(solve_direct(A, np.array([1.0, 2.0])).solution, [1.0, -1.0])
    with pytest.raises(FactorizationFailure) as info:
        solve_direct(A, np.array([1.0, 2.0]), require_positive=True)
    assert info.value.min_pivot < 0


def test_residual_failure_carries_diagnostics():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.standard_normal((30, 30)))
    A = Q @ np.diag(np.logspace(0, 15, 30)) @ Q.T
    with pytest.raises(ResidualFailure) as info:
        solve_direct(A, rng.standard_normal(30), max_refine=0, tol=1e-300)
    assert info.value.residual > 0


def test_shape_mismatch():
    with pytest.raises(ValueError):
        solve_direct(np.eye(3), np.ones(2))


def test_benchmark_residual_and_determinism(bench):
    m = refine_uniform(refine_uniform(build_structured_mesh(bench.box, 8)))
    a = solve_level(bench, m, 2)
    b = solve_level(bench, m, 2)
    assert a.solve.residual <= 1e-9 and a.solve.min_pivot > 0
    assert np.array_equal(a.solution, b.solution)
