"""Level-set interpolation, cut classification and the planar interface.

Convention: side 1 is ``{phi_hat < 0}``, side 2 is ``{phi_hat > 0}``. All cut
geometry is expressed in reference coordinates of the cut element.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateLevelSet
from .fe import LagrangeSpace
from .mesh import Mesh

SNAP = 1e-12
REF_VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(eq=False)
class LevelSetFE:
    """phi_h in V_h^k plus its piecewise linear interpolant (``p1_values``)."""

    space: LagrangeSpace
    nodal_values: np.ndarray
    p1_values: np.ndarray
    snapped: np.ndarray

    @property
    def k(self) -> int:
        return self.space.k

    @property
    def mesh(self) -> Mesh:
        return self.space.mesh

    def element_values(self, elements=None) -> np.ndarray:
        cn = self.space.cell_nodes
        return self.nodal_values[cn if elements is None else cn[np.asarray(elements)]]

    def evaluate(self, element: int, ref_points) -> np.ndarray:
        """phi_h on one element (also valid outside it: polynomial extension)."""
        return self.space.ref.values(ref_points) @ self.element_values(element)

    def p1_gradients(self) -> np.ndarray:
        """Constant gradient of phi_hat per element, shape (n_el, 2)."""
        A, _ = self.mesh.jacobians()
        v = self.p1_values[self.mesh.elements]
        g_ref = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
        return np.linalg.solve(np.swapaxes(A, 1, 2), g_ref[..., None])[..., 0]


def interpolate_levelset(phi, m: Mesh, k: int) -> LevelSetFE:
    """Nodal interpolation of ``phi`` (vectorized: (N, 2) -> (N,)) into V_h^k.

    Vertex values with ``|phi| < 1e-12 h ||grad phi_hat||`` are moved to the
    positive side so that no vertex lies on the planar interface.
    """
    space = LagrangeSpace(m, k)
    vals = np.asarray(phi(space.node_coords), dtype=float).reshape(-1)
    if not np.all(np.isfinite(vals)):
        bad = np.flatnonzero(~np.isfinite(vals))[0]
        raise ValueError(f"non-finite level set value at node {bad} {space.node_coords[bad]}")
    nv = m.n_vertices
    h = m.h_max
    tmp = LevelSetFE(space, vals, vals[:nv].copy(), np.zeros(nv, dtype=bool))
    gmax = np.linalg.norm(tmp.p1_gradients(), axis=1).max()
    thresh = SNAP * h * max(gmax, 1.0e-300)
    snapped = np.abs(vals[:nv]) < thresh
    if np.any(snapped):
        vals = vals.copy()
        vals[np.flatnonzero(snapped)] = SNAP * h
    return LevelSetFE(space, vals, vals[:nv].copy(), snapped)


@dataclass(eq=False)
class CutTopology:
    """Per-element cut state and the reference cut geometry of cut elements.

    ``elem_sign``: -1 (side 1), +1 (side 2), 0 (cut).
    ``segments``: (n_cut, 2, 2) reference endpoints of Gamma^lin in each cut element.
    ``subtris``: (n_cut, 3, 3, 2) reference sub-triangles, ``subside`` their side.
    """

    mesh: Mesh
    elem_sign: np.ndarray
    cut_elements: np.ndarray
    extended_band: np.ndarray
    segments: np.ndarray
    subtris: np.ndarray
    subside: np.ndarray
    normals: np.ndarray
    side_areas: np.ndarray

    @property
    def n_cut(self) -> int:
        return len(self.cut_elements)

    def cut_index(self) -> np.ndarray:
        """Map element -> row in the cut arrays (-1 if uncut)."""
        idx = -np.ones(self.mesh.n_elements, dtype=np.int64)
        idx[self.cut_elements] = np.arange(self.n_cut)
        return idx

    def band_vertices(self) -> np.ndarray:
        mask = np.zeros(self.mesh.n_vertices, dtype=bool)
        mask[self.mesh.elements[self.cut_elements].ravel()] = True
        return mask

    def segment_lengths(self) -> np.ndarray:
        A, _ = self.mesh.jacobians(self.cut_elements)
        d = self.segments[:, 1] - self.segments[:, 0]
        return np.linalg.norm(np.einsum("tij,tj->ti", A, d), axis=1)


def _tri_area(p):
    a = p[..., 1, :] - p[..., 0, :]
    b = p[..., 2, :] - p[..., 0, :]
    return 0.5 * (a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0])


def classify_cut(ls: LevelSetFE, m: Mesh) -> CutTopology:
    v = ls.p1_values[m.elements]
    snapped = ls.snapped[m.elements]
    if np.any(snapped.all(axis=1)):
        bad = np.flatnonzero(snapped.all(axis=1))
        raise DegenerateLevelSet(f"level set vanishes on all vertices of elements {bad[:10].tolist()}")
    neg = v < 0
    nneg = neg.sum(axis=1)
    sign = np.where(nneg == 3, -1, np.where(nneg == 0, 1, 0))
    cut = np.flatnonzero(sign == 0)

    vc = v[cut]
    negc = neg[cut]
    # lone vertex: the one whose sign differs from the other two
    lone = np.where(negc.sum(axis=1) == 1, np.argmax(negc, axis=1), np.argmin(negc, axis=1))
    ar = np.arange(len(cut))
    a = (lone + 1) % 3
    b = (lone + 2) % 3
    Xl, Xa, Xb = REF_VERTS[lone], REF_VERTS[a], REF_VERTS[b]
    pl, pa, pb = vc[ar, lone], vc[ar, a], vc[ar, b]
    ta = pl / (pl - pa)
    tb = pl / (pl - pb)
    Pa = Xl + ta[:, None] * (Xa - Xl)
    Pb = Xl + tb[:, None] * (Xb - Xl)

    A, _ = m.jacobians(cut)
    d1 = np.linalg.norm(np.einsum("tij,tj->ti", A, Xb - Pa), axis=1)
    d2 = np.linalg.norm(np.einsum("tij,tj->ti", A, Pb - Xa), axis=1)
    use1 = (d1 <= d2)[:, None, None]
    quad1 = np.where(use1, np.stack([Pa, Xa, Xb], 1), np.stack([Pa, Xa, Pb], 1))
    quad2 = np.where(use1, np.stack([Pa, Xb, Pb], 1), np.stack([Xa, Xb, Pb], 1))
    subtris = np.stack([np.stack([Xl, Pa, Pb], 1), quad1, quad2], axis=1)
    lone_side = np.where(pl < 0, 1, 2)
    subside = np.stack([lone_side, 3 - lone_side, 3 - lone_side], axis=1)

    detA = np.abs(np.linalg.det(A))
    sub_area = _tri_area(subtris) * detA[:, None]
    side_areas = np.stack([(sub_area * (subside == s)).sum(axis=1) for s in (1, 2)], axis=1)

    grads = ls.p1_gradients()[cut]
    normals = grads / np.linalg.norm(grads, axis=1, keepdims=True)

    vmask = np.zeros(m.n_vertices, dtype=bool)
    vmask[m.elements[cut].ravel()] = True
    band = np.flatnonzero(vmask[m.elements].any(axis=1))

    return CutTopology(
        mesh=m,
        elem_sign=sign,
        cut_elements=cut,
        extended_band=band,
        segments=np.stack([Pa, Pb], axis=1),
        subtris=subtris,
        subside=subside,
        normals=normals,
        side_areas=side_areas,
    )


def gamma_lin_measure(ct: CutTopology, m: Mesh | None = None) -> float:
    """Total length of the planar interface approximation."""
    if ct.n_cut == 0:
        return 0.0
    return float(ct.segment_lengths().sum())
