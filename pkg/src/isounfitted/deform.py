"""Isoparametric mesh deformation Theta_h.

On cut elements every Lagrange node x is moved along a search direction G_h
by the step d_h solving ``E_T phi_h(x + d_h G_h(x)) = phi_hat_h(x)``; the
element-wise displacements are averaged into a continuous field and extended
into the neighbouring uncut elements by polynomial edge extension.
Everywhere else the deformation is the identity.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .exceptions import NoRoot, ResolutionError, SingularJacobian
from .fe import LagrangeSpace, reference_element
from .levelset import CutTopology, LevelSetFE

log = logging.getLogger(__name__)

VARIANTS = ("gradient", "projected")


# ---------------------------------------------------------------- averaging

def project_nodal(values: np.ndarray, ct: CutTopology, space: LagrangeSpace):
    """Average element-wise nodal values over the cut elements sharing a node.

    ``values`` has shape (n_cut, n_local, ...). Returns the global nodal
    array (zero away from the cut band) and the mask of band nodes.
    """
    values = np.asarray(values, dtype=float)
    nodes = space.cell_nodes[ct.cut_elements].ravel()
    tail = values.shape[2:]
    flat = values.reshape((-1,) + tail)
    out = np.zeros((space.n_nodes,) + tail)
    np.add.at(out, nodes, flat)
    count = np.bincount(nodes, minlength=space.n_nodes)
    mask = count > 0
    out[mask] /= count[mask].reshape((-1,) + (1,) * len(tail))
    return out, mask


# ---------------------------------------------------------- search direction

@dataclass(eq=False)
class SearchDirection:
    """Nodal values of G_h on each cut element, shape (n_cut, n_local, 2)."""

    variant: str
    coeffs: np.ndarray

    def evaluate(self, row: int, ref_points, k: int) -> np.ndarray:
        psi = reference_element(k).values(ref_points)
        return psi @ self.coeffs[row]


def _phi_gradients_at_nodes(ls: LevelSetFE, elements) -> np.ndarray:
    ref = ls.space.ref
    _, g = ref.evaluate(ref.nodes)  # (n_node, n_basis, 2)
    c = ls.element_values(elements)
    g_ref = np.einsum("tb,nbd->tnd", c, g)
    A, _ = ls.mesh.jacobians(elements)
    return np.linalg.solve(np.swapaxes(A, 1, 2)[:, None], g_ref[..., None])[..., 0]


def search_direction(ls: LevelSetFE, ct: CutTopology, variant: str = "gradient") -> SearchDirection:
    if variant not in VARIANTS:
        raise ValueError(f"unknown search direction variant {variant!r}")
    g = _phi_gradients_at_nodes(ls, ct.cut_elements)
    if variant == "projected":
        avg, _ = project_nodal(g, ct, ls.space)
        g = avg[ls.space.cell_nodes[ct.cut_elements]]
    return SearchDirection(variant, g)


# ---------------------------------------------------------------- step length

def _residual(ref, c, x0, gdir, target, d):
    val, grad = ref.evaluate(x0 + d[..., None] * gdir)
    f = np.einsum("...n,...n->...", val, c) - target
    df = np.einsum("...n,...nd,...d->...", c[..., :], grad, gdir)
    return f, df


def _newton_batch(ref, c, x0, gdir, target, h, radius, tol, maxit=40):
    """Vectorized Newton from d = 0. Returns (d, converged, iterations)."""
    n = len(target)
    d = np.zeros(n)
    ok = np.zeros(n, dtype=bool)
    bad = np.zeros(n, dtype=bool)
    its = np.zeros(n, dtype=np.int64)
    scale = tol * (np.abs(target) + h)
    for _ in range(maxit):
        act = ~(ok | bad)
        if not act.any():
            break
        f, df = _residual(ref, c[act], x0[act], gdir[act], target[act], d[act])
        done = np.abs(f) <= scale[act]
        idx = np.flatnonzero(act)
        ok[idx[done]] = True
        go = idx[~done]
        f, df = f[~done], df[~done]
        flat = np.abs(df) < 1e-14
        bad[go[flat]] = True
        go, f, df = go[~flat], f[~flat], df[~flat]
        step = f / df
        d[go] -= step
        its[go] += 1
        leave = np.abs(d[go]) > radius[go]
        bad[go[leave]] = True
        tiny = (np.abs(step) <= tol * h[go]) & ~leave
        ok[go[tiny]] = True
    return d, ok & ~bad, its


def _safeguarded_scalar(ref, c, x0, gdir, target, radius, tol, h):
    """Sign scan on [-radius, radius] and bracketed root nearest to zero."""

    def f(d):
        return _residual(ref, c, x0, gdir, target, np.asarray(d, dtype=float))[0]

    ts = np.linspace(-radius, radius, 33)
    fs = f(ts)
    if np.any(fs == 0.0):
        zs = ts[fs == 0.0]
        return float(zs[np.argmin(np.abs(zs))])
    ch = np.flatnonzero(np.sign(fs[:-1]) != np.sign(fs[1:]))
    if len(ch) == 0:
        return None
    mid = 0.5 * (ts[ch] + ts[ch + 1])
    j = ch[np.argmin(np.abs(mid))]
    return brentq(lambda s: float(f(s)), ts[j], ts[j + 1], xtol=tol * h, rtol=4 * np.finfo(float).eps, maxiter=200)


def _solve_pairs(ls, elements, ref_pts, gdir_phys, alpha0, tol, rows_for_error=None):
    """d_h for points given in reference coords of their elements."""
    m = ls.mesh
    ref = ls.space.ref
    A, _ = m.jacobians(elements)
    gdir = np.linalg.solve(A, gdir_phys[..., None])[..., 0]
    c = ls.element_values(elements)
    lam = np.column_stack([1 - ref_pts[:, 0] - ref_pts[:, 1], ref_pts])
    target = np.einsum("pi,pi->p", lam, ls.p1_values[m.elements[elements]])
    h = m.diameters()[elements]
    radius = alpha0 * h
    d, ok, its = _newton_batch(ref, c, ref_pts, gdir, target, h, radius, tol)
    for p in np.flatnonzero(~ok):
        r = _safeguarded_scalar(ref, c[p], ref_pts[p], gdir[p], target[p], radius[p], tol, h[p])
        if r is None:
            pt = m.affine_map(int(elements[p]), ref_pts[p])
            raise NoRoot(int(elements[p]), pt)
        d[p] = r
    if np.any(~ok):
        log.debug("safeguarded fallback used at %d of %d points", (~ok).sum(), len(d))
    return d, its, ~ok


def solve_dh(ls: LevelSetFE, gh: SearchDirection, ct: CutTopology, element: int, point,
             alpha0: float = 0.5, tol: float = 1e-14) -> float:
    """Step length d_h at a physical ``point`` of cut ``element``."""
    row = ct.cut_index()[element]
    if row < 0:
        raise ValueError(f"element {element} is not cut")
    A, b = ls.mesh.jacobians(element)
    xr = np.linalg.solve(A, np.asarray(point, dtype=float) - b)
    g = gh.evaluate(row, xr, ls.k)
    d, _, _ = _solve_pairs(ls, np.array([element]), xr[None], g[None], alpha0, tol)
    return float(d[0])


@dataclass(eq=False)
class ThetaGamma:
    """Result of the local construction on the cut band."""

    step: np.ndarray          # d_h at local nodes, (n_cut, n_local)
    psi_disp: np.ndarray      # d_h G_h at local nodes, (n_cut, n_local, 2)
    nodal_disp: np.ndarray    # averaged displacement, (n_nodes, 2)
    band_nodes: np.ndarray    # mask of nodes of cut elements
    newton_iterations: np.ndarray
    fallback: np.ndarray


def build_theta_gamma(ls: LevelSetFE, gh: SearchDirection, ct: CutTopology,
                      alpha0: float = 0.5, tol: float = 1e-14) -> ThetaGamma:
    space = ls.space
    ref = space.ref
    nc, nl = ct.n_cut, ref.n_local
    elements = np.repeat(ct.cut_elements, nl)
    ref_pts = np.tile(ref.nodes, (nc, 1))
    G = gh.coeffs.reshape(-1, 2)
    d, its, fb = _solve_pairs(ls, elements, ref_pts, G, alpha0, tol)
    disp = (d[:, None] * G).reshape(nc, nl, 2)
    h = ls.mesh.diameters()[ct.cut_elements]
    mag = np.linalg.norm(disp, axis=2).max(axis=1) if nc else np.zeros(0)
    if np.any(mag > alpha0 * h):
        t = int(ct.cut_elements[np.argmax(mag / h)])
        raise ResolutionError(f"nodal displacement exceeds {alpha0} h_T on element {t}")
    nodal, mask = project_nodal(disp, ct, space)
    return ThetaGamma(d.reshape(nc, nl), disp, nodal, mask, its.reshape(nc, nl), fb.reshape(nc, nl))


# ------------------------------------------------------------ edge extension

def _lagrange_1d(nodes, values, t):
    """Evaluate the interpolant through (nodes, values) at t; values (n, ...)."""
    t = np.asarray(t, dtype=float)
    basis = []
    for j, tj in enumerate(nodes):
        lj = np.ones_like(t)
        for m, tm in enumerate(nodes):
            if m != j:
                lj = lj * (t - tm) / (tj - tm)
        basis.append(lj)
    return np.tensordot(np.moveaxis(np.array(basis), 0, -1), np.asarray(values, dtype=float), axes=1)


def lenoir_extend_edge(w, k: int, edge: int, ref_points, check_ends: bool = True) -> np.ndarray:
    """Extend an edge trace with zero end values into the reference triangle.

    ``w`` is either the array of values at the ``k+1`` equispaced points of
    local edge ``edge`` (walking from vertex (edge+1)%3 to (edge+2)%3; a
    polynomial trace of degree k), or a callable ``w(t)`` for ``t in [0, 1]``.
    Returns the extension evaluated at ``ref_points``. ``check_ends=False``
    skips the zero end-value check (the operator then annihilates the
    linear part of the trace).
    """
    if k < 1:
        raise ValueError("degree must be >= 1")
    ref_points = np.asarray(ref_points, dtype=float)
    if callable(w):
        trace = w
        ends = np.asarray([w(0.0), w(1.0)], dtype=float)
    else:
        wv = np.asarray(w, dtype=float)
        if len(wv) != k + 1:
            raise ValueError(f"expected {k + 1} edge values, got {len(wv)}")
        tk = np.linspace(0.0, 1.0, k + 1)

        def trace(t):
            return _lagrange_1d(tk, wv, t)

        ends = wv[[0, -1]]
    scale = max(1.0, float(np.max(np.abs(ends))) if not callable(w) else 1.0)
    if check_ends and np.max(np.abs(ends)) > 1e-13 * scale:
        raise ValueError("edge trace must vanish at both edge vertices")

    lam = np.stack([1 - ref_points[..., 0] - ref_points[..., 1], ref_points[..., 0], ref_points[..., 1]])
    a, b = (edge + 1) % 3, (edge + 2) % 3
    om = lam[a] + lam[b]
    safe = np.where(om > 1e-300, om, 1.0)
    t = np.where(om > 1e-300, lam[b] / safe, 0.5)

    def interp(level):
        tl = np.linspace(0.0, 1.0, level + 1)
        return _lagrange_1d(tl, np.asarray(trace(tl), dtype=float), t)

    tail = np.shape(trace(0.0))
    omx = om.reshape(om.shape + (1,) * len(tail))
    out = np.zeros(om.shape + tail)
    prev = interp(1)
    for level in range(2, k + 1):
        cur = interp(level)
        out = out + omx**level * (cur - prev)
        prev = cur
    if callable(w):
        out = out + omx ** (k + 1) * (np.asarray(trace(t)) - prev)
    return out


# -------------------------------------------------------------- deformation

@dataclass(eq=False)
class Deformation:
    """Theta_h - id as a degree-k vector field, nodal values ``disp``."""

    space: LagrangeSpace
    disp: np.ndarray
    active_band: np.ndarray
    theta_gamma: ThetaGamma | None = None

    @property
    def k(self) -> int:
        return self.space.k

    @property
    def mesh(self):
        return self.space.mesh

    @classmethod
    def identity(cls, space: LagrangeSpace) -> "Deformation":
        return cls(space, np.zeros((space.n_nodes, 2)), np.zeros(0, dtype=np.int64))

    def element_disp(self, elements) -> np.ndarray:
        return self.disp[self.space.cell_nodes[np.asarray(elements)]]

    def map(self, elements, ref_points) -> np.ndarray:
        """Theta_h(Phi_T(xhat)).

        Either one element with points (Q, 2) or elements (P,) with points (P, Q, 2).
        """
        A, b = self.mesh.jacobians(elements)
        x = np.asarray(ref_points, dtype=float)
        psi = self.space.ref.values(x)
        C = self.element_disp(elements)
        if A.ndim == 3:
            aff = np.einsum("pij,pqj->pqi", A, x) + b[:, None, :]
            return aff + np.einsum("pqn,pnd->pqd", psi, C)
        return x @ A.T + b + psi @ C

    def gradient(self, elements, ref_points) -> np.ndarray:
        """F = D Theta_h at the points, shape (..., 2, 2)."""
        A, _ = self.mesh.jacobians(elements)
        x = np.asarray(ref_points, dtype=float)
        _, g = self.space.ref.evaluate(x)
        C = self.element_disp(elements)
        if A.ndim == 3:  # batched elements: (P, Q, 2)
            Dref = np.einsum("pni,pqnj->pqij", C, g)
            Ainv = np.linalg.inv(A)[:, None]
        else:
            Dref = np.einsum("ni,...nj->...ij", C, g)
            Ainv = np.linalg.inv(A)
        return np.eye(2) + Dref @ Ainv


def deformation_gradient(d: Deformation, element: int, ref_point, normal=None):
    """``(F, J_V, F^{-T})`` and, if a planar normal is given, also ``J_Gamma``."""
    F = d.gradient(element, ref_point)
    J = np.linalg.det(F)
    if np.any(J <= 1e-10):
        raise SingularJacobian(f"det F = {np.min(J):.3e} on element {element}")
    FinvT = np.swapaxes(np.linalg.inv(F), -1, -2)
    if normal is None:
        return F, J, FinvT
    JG = J * np.linalg.norm(FinvT @ np.asarray(normal, dtype=float), axis=-1)
    return F, J, FinvT, JG


def build_theta(ls: LevelSetFE, gh: SearchDirection, ct: CutTopology,
                alpha0: float = 0.5, tol: float = 1e-14) -> Deformation:
    space = ls.space
    m = ls.mesh
    k = space.k
    tg = build_theta_gamma(ls, gh, ct, alpha0, tol)
    disp = np.where(tg.band_nodes[:, None], tg.nodal_disp, 0.0)

    outer = np.setdiff1d(ct.extended_band, ct.cut_elements)
    if k >= 3 and len(outer):
        on_cut = np.zeros(len(m.edges), dtype=bool)
        on_cut[m.element_edges[ct.cut_elements].ravel()] = True
        ref = space.ref
        inner = ref.interior_local_nodes
        pts = ref.nodes[inner]
        for t in outer:
            acc = np.zeros((len(inner), 2))
            hit = False
            for e in range(3):
                if not on_cut[m.element_edges[t, e]]:
                    continue
                w = disp[space.cell_nodes[t, ref.edge_local_nodes(e)]]
                acc += lenoir_extend_edge(w, k, e, pts)
                hit = True
            if hit:
                disp[space.cell_nodes[t, inner]] = acc
    return Deformation(space, disp, ct.extended_band, tg)
