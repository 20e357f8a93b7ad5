"""Simplicial 2D background meshes.

Elements are vertex triples with positive orientation. Local edge ``e`` of
an element is the edge opposite local vertex ``e``, i.e. it joins local
vertices ``(e+1) % 3`` and ``(e+2) % 3``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def _edge_structure(elements: np.ndarray):
    ne = len(elements)
    loc = np.array([[1, 2], [2, 0], [0, 1]])
    pairs = elements[:, loc].reshape(-1, 2)
    pairs = np.sort(pairs, axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    inverse = inverse.reshape(ne, 3)
    edge_elements = -np.ones((len(edges), 2), dtype=np.int64)
    counts = np.zeros(len(edges), dtype=np.int64)
    for t in range(ne):
        for e in inverse[t]:
            if counts[e] >= 2:
                raise ValueError(f"edge {edges[e]} shared by more than 2 elements")
            edge_elements[e, counts[e]] = t
            counts[e] += 1
    return edges, inverse, edge_elements


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    elements: np.ndarray
    edges: np.ndarray = field(init=False)
    element_edges: np.ndarray = field(init=False)
    edge_elements: np.ndarray = field(init=False)
    boundary_edges: np.ndarray = field(init=False)
    boundary_vertices: np.ndarray = field(init=False)

    def __post_init__(self):
        vertices = np.ascontiguousarray(self.vertices, dtype=float)
        elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise ValueError("vertices must have shape (n, 2)")
        if elements.ndim != 2 or elements.shape[1] != 3:
            raise ValueError("elements must have shape (m, 3)")
        edges, element_edges, edge_elements = _edge_structure(elements)
        bnd = np.flatnonzero(edge_elements[:, 1] < 0)
        for name, value in [
            ("vertices", vertices),
            ("elements", elements),
            ("edges", edges),
            ("element_edges", element_edges),
            ("edge_elements", edge_elements),
            ("boundary_edges", bnd),
            ("boundary_vertices", np.unique(edges[bnd])),
        ]:
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        if np.any(self.signed_areas() <= 0):
            raise ValueError("elements must be positively oriented and non-degenerate")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.elements]
        a = p[:, 1] - p[:, 0]
        b = p[:, 2] - p[:, 0]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    def edge_lengths(self) -> np.ndarray:
        p = self.vertices[self.edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    @property
    def h_max(self) -> float:
        return float(self.edge_lengths().max())

    def diameters(self) -> np.ndarray:
        """Longest edge per element (h_T)."""
        return self.edge_lengths()[self.element_edges].max(axis=1)

    def jacobians(self, elements=None):
        """Affine data ``(A_T, b_T)`` with ``Phi_T(xhat) = A_T xhat + b_T``."""
        el = self.elements if elements is None else self.elements[np.asarray(elements)]
        p = self.vertices[el]
        A = np.stack([p[..., 1, :] - p[..., 0, :], p[..., 2, :] - p[..., 0, :]], axis=-1)
        return A, p[..., 0, :]

    def affine_map(self, element: int, ref_point) -> np.ndarray:
        """Map reference coordinates of one element to physical coordinates."""
        if not 0 <= element < self.n_elements:
            raise IndexError(f"element {element} out of range")
        A, b = self.jacobians(element)
        return np.asarray(ref_point, dtype=float) @ A.T + b

    def vertex_elements(self):
        """For every vertex the sorted array of incident elements."""
        order = np.argsort(self.elements.ravel(), kind="stable")
        owners = order // 3
        counts = np.bincount(self.elements.ravel(), minlength=self.n_vertices)
        return np.split(owners, np.cumsum(counts)[:-1])

    def vertex_patch(self, vertex: int, restriction=None) -> np.ndarray:
        """Elements of ``restriction`` (default: all) having ``vertex`` as a node."""
        cand = np.arange(self.n_elements) if restriction is None else np.asarray(restriction)
        hit = cand[np.any(self.elements[cand] == vertex, axis=1)]
        if len(hit) == 0:
            raise ValueError(f"vertex {vertex} belongs to no element of the restriction")
        return hit

    def write_text(self, path) -> None:
        """Dump as ``v x y`` / ``t i j k`` lines."""
        lines = [f"v {float(x)!r} {float(y)!r}" for x, y in self.vertices]
        lines += [f"t {i} {j} {k}" for i, j, k in self.elements]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read_text(cls, path) -> "Mesh":
        verts, tris = [], []
        for line in Path(path).read_text().splitlines():
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                verts.append([float(parts[1]), float(parts[2])])
            elif parts[0] == "t":
                tris.append([int(p) for p in parts[1:4]])
        return cls(np.array(verts), np.array(tris))


DIAGONALS = ("rows", "alternating", "uniform")


def build_structured_mesh(box, n: int, diagonal: str = "rows") -> Mesh:
    """Triangulate ``box = (x0, x1, y0, y1)`` with ``n`` cells per axis.

    ``diagonal='rows'`` flips the cell diagonal from one row of cells to the
    next (every interior vertex has 6 neighbours), ``'alternating'`` flips it
    in a checkerboard pattern (valence 4 or 8) and ``'uniform'`` uses the
    same diagonal everywhere.
    """
    x0, x1, y0, y1 = (float(v) for v in box)
    if n < 1:
        raise ValueError("need at least one subdivision")
    if not (x1 > x0 and y1 > y0):
        raise ValueError("degenerate box")
    if diagonal not in DIAGONALS:
        raise ValueError(f"unknown diagonal pattern {diagonal!r}")
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            flip = {"uniform": 0, "rows": j % 2, "alternating": (i + j) % 2}[diagonal]
            if not flip:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    return Mesh(vertices, np.array(tris, dtype=np.int64))


def refine_uniform(m: Mesh) -> Mesh:
    """Red refinement: split every triangle into 4 by its edge midpoints."""
    mids = 0.5 * (m.vertices[m.edges[:, 0]] + m.vertices[m.edges[:, 1]])
    vertices = np.vstack([m.vertices, mids])
    nv = m.n_vertices
    v = m.elements
    e = m.element_edges + nv  # midpoint of edge opposite local vertex i
    children = np.concatenate(
        [
            np.column_stack([v[:, 0], e[:, 2], e[:, 1]]),
            np.column_stack([e[:, 2], v[:, 1], e[:, 0]]),
            np.column_stack([e[:, 1], e[:, 0], v[:, 2]]),
            np.column_stack([e[:, 0], e[:, 1], e[:, 2]]),
        ]
    )
    # keep children of one parent adjacent: parent t -> 4t..4t+3
    ne = m.n_elements
    order = np.arange(4 * ne).reshape(4, ne).T.ravel()
    return Mesh(vertices, children[order])
