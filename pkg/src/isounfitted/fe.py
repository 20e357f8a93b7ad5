"""Lagrange finite elements of degree k on triangles.

Local nodes are the equispaced lattice points ``(i/k, j/k)`` of the
reference triangle ``{x >= 0, y >= 0, x + y <= 1}``; the basis is written in
barycentric product form, which is exact at the nodes.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import Mesh


def lattice(k: int) -> np.ndarray:
    """Barycentric multi-indices ``(a0, a1, a2)``, ``a0 + a1 + a2 = k``.

    Ordering: vertices, then edge nodes edge by edge (local edge e opposite
    vertex e, walking from vertex (e+1)%3 to (e+2)%3), then interior nodes.
    """
    pts = [(k, 0, 0), (0, k, 0), (0, 0, k)] if k > 0 else [(0, 0, 0)]
    if k > 1:
        for e in range(3):
            a, b = (e + 1) % 3, (e + 2) % 3
            for s in range(1, k):
                m = [0, 0, 0]
                m[a], m[b] = k - s, s
                pts.append(tuple(m))
        for j in range(1, k):
            for i in range(1, k - j):
                pts.append((k - i - j, i, j))
    return np.array(pts, dtype=np.int64)


def _factor_tables(lam: np.ndarray, k: int):
    """``P[a](t) = prod_{s<a} (k t - s)/(s+1)`` and its derivative, a = 0..k."""
    shape = lam.shape
    P = np.ones((k + 1,) + shape)
    dP = np.zeros((k + 1,) + shape)
    for a in range(1, k + 1):
        f = (k * lam - (a - 1)) / a
        P[a] = P[a - 1] * f
        dP[a] = dP[a - 1] * f + P[a - 1] * (k / a)
    return P, dP


@dataclass(frozen=True, eq=False)
class ReferenceElement:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("degree must be >= 1")

    @property
    def multi_indices(self) -> np.ndarray:
        return lattice(self.k)

    @property
    def n_local(self) -> int:
        return (self.k + 1) * (self.k + 2) // 2

    @property
    def nodes(self) -> np.ndarray:
        """Reference coordinates of the local nodes."""
        return self.multi_indices[:, 1:] / self.k

    def edge_local_nodes(self, e: int) -> np.ndarray:
        """Local node ids on local edge ``e`` ordered from vertex (e+1)%3 to (e+2)%3."""
        k = self.k
        a, b = (e + 1) % 3, (e + 2) % 3
        inner = 3 + (k - 1) * e + np.arange(k - 1)
        return np.concatenate([[a], inner, [b]]).astype(np.int64)

    @property
    def interior_local_nodes(self) -> np.ndarray:
        return np.arange(3 + 3 * (self.k - 1), self.n_local)

    def values(self, ref_points) -> np.ndarray:
        """Basis values, shape ``(..., n_local)``."""
        return self.evaluate(ref_points)[0]

    def evaluate(self, ref_points):
        """Values ``(..., n)`` and reference gradients ``(..., n, 2)``.

        Points outside the reference triangle are allowed (polynomial extension).
        """
        x = np.asarray(ref_points, dtype=float)
        lam = np.stack([1.0 - x[..., 0] - x[..., 1], x[..., 0], x[..., 1]])
        P, dP = _factor_tables(lam, self.k)
        mi = self.multi_indices
        F = [P[mi[:, m], m] for m in range(3)]
        dF = [dP[mi[:, m], m] for m in range(3)]
        # F[m] has shape (n, ...)
        val = F[0] * F[1] * F[2]
        dl0 = dF[0] * F[1] * F[2]
        dl1 = F[0] * dF[1] * F[2]
        dl2 = F[0] * F[1] * dF[2]
        grad = np.stack([dl1 - dl0, dl2 - dl0], axis=-1)
        val = np.moveaxis(val, 0, -1)
        grad = np.moveaxis(grad, 0, -2)
        return val, grad


@lru_cache(maxsize=None)
def reference_element(k: int) -> ReferenceElement:
    return ReferenceElement(k)


def reference_basis(k: int, ref_point):
    """Values and reference gradients of all degree-k basis functions."""
    return reference_element(k).evaluate(ref_point)


class LagrangeSpace:
    """Global node numbering of the continuous space V_h^k.

    Vertex nodes come first and carry the vertex index, then edge nodes,
    then element-interior nodes.
    """

    def __init__(self, mesh: Mesh, k: int):
        self.mesh = mesh
        self.k = k
        self.ref = reference_element(k)
        ne, nloc = mesh.n_elements, self.ref.n_local
        nv, nE = mesh.n_vertices, len(mesh.edges)
        el = mesh.elements
        cell = np.empty((ne, nloc), dtype=np.int64)
        cell[:, :3] = el
        if k > 1:
            for e in range(3):
                edge = mesh.element_edges[:, e]
                # local walk from (e+1)%3 to (e+2)%3; global walk from lower id
                start = el[:, (e + 1) % 3]
                forward = start == mesh.edges[edge, 0]
                s = np.arange(k - 1)
                pos = np.where(forward[:, None], s[None, :], (k - 2 - s)[None, :])
                cell[:, 3 + (k - 1) * e + s] = nv + edge[:, None] * (k - 1) + pos
            n_int = (k - 1) * (k - 2) // 2
            base = nv + nE * (k - 1)
            cell[:, 3 + 3 * (k - 1):] = base + np.arange(ne)[:, None] * n_int + np.arange(n_int)
            self.n_nodes = base + ne * n_int
        else:
            self.n_nodes = nv
        self.cell_nodes = cell
        cell.setflags(write=False)

        A, b = mesh.jacobians()
        coords = np.empty((self.n_nodes, 2))
        coords[cell] = np.einsum("tij,nj->tni", A, self.ref.nodes) + b[:, None, :]
        coords[:nv] = mesh.vertices
        self.node_coords = coords

        bnd = np.zeros(self.n_nodes, dtype=bool)
        bnd[mesh.boundary_vertices] = True
        if k > 1:
            be = mesh.boundary_edges
            bnd[nv + be[:, None] * (k - 1) + np.arange(k - 1)] = True
        self.boundary_nodes = bnd

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolation of a vectorized callable ``func(points) -> values``."""
        return np.asarray(func(self.node_coords), dtype=float)


# side 1 <-> negative level set values, side 2 <-> positive
SIDES = (1, 2)


class UnfittedSpace:
    """The doubled space V_h^k|Omega_1^lin + V_h^k|Omega_2^lin.

    ``dof_map[s]`` is an ``(n_elements, n_local)`` array of global dof
    indices for side ``s`` (``-1`` on elements inactive for that side).
    Numbering is side-major, then by global node index.
    """

    def __init__(self, space: LagrangeSpace, elem_sign: np.ndarray):
        self.space = space
        self.k = space.k
        self.mesh = space.mesh
        self.elem_sign = np.asarray(elem_sign)
        self.dof_map = {}
        self.active_elements = {}
        self.dof_nodes = {}
        offset = 0
        for s in SIDES:
            want = -1 if s == 1 else 1
            active = np.flatnonzero((self.elem_sign == want) | (self.elem_sign == 0))
            nodes = np.unique(space.cell_nodes[active])
            lookup = -np.ones(space.n_nodes, dtype=np.int64)
            lookup[nodes] = offset + np.arange(len(nodes))
            dm = -np.ones_like(space.cell_nodes)
            dm[active] = lookup[space.cell_nodes[active]]
            self.dof_map[s] = dm
            self.active_elements[s] = active
            self.dof_nodes[s] = nodes
            offset += len(nodes)
        self.n_dofs = offset

    def side_offset(self, side: int) -> int:
        return 0 if side == 1 else len(self.dof_nodes[1])

    def dirichlet_dofs(self):
        """``(dofs, nodes, sides)`` for all active boundary nodes."""
        dofs, nodes, sides = [], [], []
        for s in SIDES:
            n = self.dof_nodes[s]
            mask = self.space.boundary_nodes[n]
            dofs.append(self.side_offset(s) + np.flatnonzero(mask))
            nodes.append(n[mask])
            sides.append(np.full(mask.sum(), s))
        return np.concatenate(dofs), np.concatenate(nodes), np.concatenate(sides)

    def interpolate(self, funcs) -> np.ndarray:
        """Coefficient vector from per-side callables ``{1: f1, 2: f2}``."""
        u = np.zeros(self.n_dofs)
        for s in SIDES:
            n = self.dof_nodes[s]
            off = self.side_offset(s)
            u[off:off + len(n)] = funcs[s](self.space.node_coords[n])
        return u

    def element_coefficients(self, coeffs, element: int, side: int) -> np.ndarray:
        dm = self.dof_map[side][element]
        if dm[0] < 0:
            raise ValueError(f"element {element} is not active on side {side}")
        return np.asarray(coeffs)[dm]


def build_unfitted_space(mesh: Mesh, cut, k: int) -> UnfittedSpace:
    return UnfittedSpace(LagrangeSpace(mesh, k), cut.elem_sign)


def evaluate_isoparametric(space: UnfittedSpace, coeffs, deformation, element: int, ref_point, side: int):
    """Value and physical gradient of ``v_h o Theta_h^{-1}`` at ``Theta_h(Phi_T(ref_point))``.

    Never inverts Theta_h: the gradient is ``F^{-T} A_T^{-T} grad_ref``.
    """
    from .exceptions import SingularJacobian

    c = space.element_coefficients(coeffs, element, side)
    val, grad = space.space.ref.evaluate(ref_point)
    A, _ = space.mesh.jacobians(element)
    F = deformation.gradient(element, ref_point)
    det = np.linalg.det(F)
    if np.any(det <= 1e-10):
        raise SingularJacobian(f"det F = {np.min(det):.3e} on element {element}")
    g_ref = np.einsum("...nd,n->...d", grad, c)
    g_aff = np.linalg.solve(A.T, g_ref[..., None])[..., 0]
    g_phys = np.linalg.solve(np.swapaxes(F, -1, -2), g_aff[..., None])[..., 0]
    return val @ c, g_phys
