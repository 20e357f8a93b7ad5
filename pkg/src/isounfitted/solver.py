"""Sparse direct solve with a residual certificate."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import FactorizationFailure, ResidualFailure

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-9


@dataclass(eq=False)
class SolveReport:
    solution: np.ndarray
    residual: float
    min_pivot: float
    refinement_steps: int
    condition_estimate: float | None = None


def _factorize(A):
    # symmetric mode without threshold pivoting: U's diagonal holds the
    # pivots of a symmetric LDL^T-type elimination
    lu = spla.splu(
        A.tocsc(),
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options=dict(SymmetricMode=True),
    )
    return lu


def _pivots(lu) -> np.ndarray:
    if not np.array_equal(lu.perm_r, lu.perm_c):
        log.warning("row interchanges during factorization; pivots are not symmetric")
    return lu.U.diagonal()


def _condition(A, lu, iters=200, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(A.shape[0])
    big = small = 0.0
    y = x / np.linalg.norm(x)
    for _ in range(iters):
        z = A @ y
        big = np.linalg.norm(z)
        y = z / big
    y = x / np.linalg.norm(x)
    for _ in range(iters):
        z = lu.solve(y)
        small = np.linalg.norm(z)
        y = z / small
    return big * small


def solve_direct(A, b, max_refine: int = 3, tol: float = RESIDUAL_TOL,
                 require_positive: bool = False, estimate_condition: bool = False) -> SolveReport:
    """Solve ``A x = b`` by sparse LU with up to ``max_refine`` refinement steps."""
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != len(b):
        raise ValueError("system must be square and match the right-hand side")
    try:
        lu = _factorize(A)
    except RuntimeError as exc:  # exactly singular
        raise FactorizationFailure(f"factorization failed: {exc}", min_pivot=0.0) from exc
    piv = _pivots(lu)
    min_pivot = float(piv.min()) if len(piv) else np.inf
    if min_pivot == 0.0 or not np.isfinite(min_pivot):
        raise FactorizationFailure("zero pivot", min_pivot=min_pivot)
    if require_positive and min_pivot <= 0.0:
        raise FactorizationFailure(f"negative pivot {min_pivot:.3e}", min_pivot=min_pivot)

    bnorm = np.linalg.norm(b)
    x = lu.solve(b)
    r = b - A @ x
    res = np.linalg.norm(r) / bnorm if bnorm > 0 else np.linalg.norm(r)
    steps = 0
    while res > tol and steps < max_refine:
        x = x + lu.solve(r)
        r = b - A @ x
        res = np.linalg.norm(r) / bnorm if bnorm > 0 else np.linalg.norm(r)
        steps += 1
    if res > tol:
        raise ResidualFailure(f"relative residual {res:.3e} after {steps} refinement steps", residual=res)
    cond = _condition(A, lu) if estimate_condition else None
    return SolveReport(x, float(res), min_pivot, steps, cond)


def solve_system(system, **kw) -> tuple[np.ndarray, SolveReport]:
    """Solve an assembled system with Dirichlet elimination; returns full vector."""
    Aff, bf, _ = system.reduced()
    rep = solve_direct(Aff, bf, **kw)
    return system.expand(rep.solution), rep
