"""Quadrature on the reference cut geometry, mapped through Theta_h.

Triangle rules are collapsed Gauss rules (Gauss-Legendre x Gauss-Jacobi),
segment rules are Gauss-Legendre on [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .exceptions import SingularJacobian

MAX_DEGREE = 20
REF_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int


def _check_degree(degree):
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"quadrature degree {degree} not supported (0..{MAX_DEGREE})")


@lru_cache(maxsize=None)
def segment_rule(degree: int) -> QuadratureRule:
    _check_degree(degree)
    n = degree // 2 + 1
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w, degree)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Rule on {x, y >= 0, x + y <= 1}; weights sum to 1/2."""
    _check_degree(degree)
    n = degree // 2 + 1
    u, wu = np.polynomial.legendre.leggauss(n)
    u, wu = 0.5 * (u + 1.0), 0.5 * wu
    s, ws = roots_jacobi(n, 1.0, 0.0)
    v, wv = 0.5 * (s + 1.0), 0.25 * ws  # weight (1 - v) on [0, 1]
    U, V = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([(U * (1.0 - V)).ravel(), V.ravel()])
    wts = np.outer(wu, wv).ravel()
    return QuadratureRule(pts, wts, degree)


def subtriangle_points(tris: np.ndarray, rule: QuadratureRule):
    """Map a triangle rule onto reference sub-triangles ``tris`` (..., 3, 2).

    Returns points (..., Q, 2) and weights (..., Q) including the area factor.
    """
    p0 = tris[..., 0, :]
    e1 = tris[..., 1, :] - p0
    e2 = tris[..., 2, :] - p0
    det = np.abs(e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0])
    q = rule.points
    pts = p0[..., None, :] + q[:, 0, None] * e1[..., None, :] + q[:, 1, None] * e2[..., None, :]
    return pts, det[..., None] * rule.weights


@dataclass(eq=False)
class MappedPoints:
    """Quadrature points of a batch of integration cells.

    ``elements`` (P,), ``ref`` (P, Q, 2), ``weights`` (P, Q) physical weights,
    ``F`` (P, Q, 2, 2), ``J`` (P, Q) = det F, ``x`` (P, Q, 2) physical points.
    Interface batches also carry ``normal`` (unit normal of Gamma_h),
    ``nu`` = det F F^{-T} n^lin, ``JG`` and ``lin_weights`` (measure on Gamma^lin).
    """

    elements: np.ndarray
    side: np.ndarray
    ref: np.ndarray
    weights: np.ndarray
    x: np.ndarray
    F: np.ndarray
    J: np.ndarray
    FinvT: np.ndarray
    normal: np.ndarray | None = None
    nu: np.ndarray | None = None
    JG: np.ndarray | None = None
    lin_weights: np.ndarray | None = None


def _geometry(d, elements, ref):
    F = d.gradient(elements, ref)
    J = np.linalg.det(F)
    if np.any(J <= 1e-10):
        p = np.unravel_index(np.argmin(J), J.shape)
        raise SingularJacobian(f"det F = {J[p]:.3e} on element {elements[p[0]]}")
    FinvT = np.swapaxes(np.linalg.inv(F), -1, -2)
    return F, J, FinvT, d.map(elements, ref)


def volume_cells(ct, side=None):
    """Integration cells: ``(elements, sides, ref triangles)``.

    Uncut elements contribute the reference triangle, cut elements their
    sub-triangles. ``side`` restricts to one side.
    """
    sign = ct.elem_sign
    els, sides, tris = [], [], []
    for s in (1, 2) if side is None else (side,):
        e = np.flatnonzero(sign == (-1 if s == 1 else 1))
        els.append(e)
        sides.append(np.full(len(e), s))
        tris.append(np.broadcast_to(REF_TRIANGLE, (len(e), 3, 2)))
        rows, j = np.nonzero(ct.subside == s)
        els.append(ct.cut_elements[rows])
        sides.append(np.full(len(rows), s))
        tris.append(ct.subtris[rows, j])
    return np.concatenate(els), np.concatenate(sides), np.concatenate(tris)


def mapped_volume_batch(ct, d, degree: int, side=None, elements=None) -> MappedPoints:
    els, sides, tris = volume_cells(ct, side)
    if elements is not None:
        keep = np.isin(els, elements)
        els, sides, tris = els[keep], sides[keep], tris[keep]
    ref, w = subtriangle_points(tris, triangle_rule(degree))
    F, J, FinvT, x = _geometry(d, els, ref)
    detA = np.abs(np.linalg.det(d.mesh.jacobians(els)[0]))
    return MappedPoints(els, sides, ref, w * detA[:, None] * J, x, F, J, FinvT)


def mapped_volume_points(ct, d, element: int, side: int, degree: int) -> MappedPoints:
    """Volume points of one element restricted to one side."""
    sign = ct.elem_sign[element]
    if sign != 0 and sign != (-1 if side == 1 else 1):
        raise ValueError(f"element {element} has no part on side {side}")
    return mapped_volume_batch(ct, d, degree, side=side, elements=[element])


def mapped_interface_batch(ct, d, degree: int, rows=None) -> MappedPoints:
    rows = np.arange(ct.n_cut) if rows is None else np.asarray(rows)
    els = ct.cut_elements[rows]
    rule = segment_rule(degree)
    seg = ct.segments[rows]
    ref = seg[:, None, 0, :] + rule.points[None, :, None] * (seg[:, None, 1, :] - seg[:, None, 0, :])
    length = ct.segment_lengths()[rows]
    F, J, FinvT, x = _geometry(d, els, ref)
    nlin = ct.normals[rows]
    nu = J[..., None] * np.einsum("pqij,pj->pqi", FinvT, nlin)
    JG = np.linalg.norm(nu, axis=-1)
    w = length[:, None] * rule.weights[None, :]
    return MappedPoints(
        els, np.zeros(len(els), dtype=np.int64), ref, w * JG, x, F, J, FinvT,
        normal=nu / JG[..., None], nu=nu, JG=JG, lin_weights=w,
    )


def mapped_interface_points(ct, d, element: int, degree: int) -> MappedPoints:
    row = ct.cut_index()[element]
    if row < 0:
        raise ValueError(f"element {element} is not cut")
    return mapped_interface_batch(ct, d, degree, rows=[row])
