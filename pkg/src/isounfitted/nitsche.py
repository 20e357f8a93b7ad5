"""Unfitted Nitsche discretization on the deformed cut mesh.

All integrals are evaluated on the undeformed reference configuration
(sub-triangles and planar segments) with the Jacobian factors of Theta_h.
Jumps are ``[u] = u_1 - u_2`` and the normal points from side 1 to side 2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
import scipy.sparse as sp

from .exceptions import BoundaryConflict
from .fe import SIDES, UnfittedSpace
from .quadrature import (
    mapped_interface_batch,
    mapped_volume_batch,
    segment_rule,
    subtriangle_points,
    triangle_rule,
)


@dataclass
class ProblemData:
    """Coefficients, sources and Dirichlet data of the interface problem.

    ``f`` and ``g_dirichlet`` map side -> vectorized callable ``(N, 2) -> (N,)``;
    a single callable for ``g_dirichlet`` is used on both sides. Sources must
    be evaluable slightly beyond their own subdomain.
    """

    alpha: tuple[float, float] = (1.0, 2.0)
    f: dict = field(default_factory=dict)
    g_dirichlet: object = None
    lambda_factor: float = 20.0

    def __post_init__(self):
        if min(self.alpha) <= 0:
            raise ValueError("diffusion coefficients must be positive")
        if self.lambda_factor <= 0:
            raise ValueError("lambda_factor must be positive")

    @property
    def alpha_mean(self) -> float:
        return 0.5 * (self.alpha[0] + self.alpha[1])

    def penalty(self, k: int) -> float:
        return self.lambda_factor * k * k

    def dirichlet(self, side: int):
        g = self.g_dirichlet
        return g[side] if isinstance(g, dict) else g


@dataclass
class QuadConfig:
    """Exactness degrees for the different integrals (None = default for k)."""

    stiffness: int | None = None
    penalty: int | None = None
    rhs: int | None = None

    def resolve(self, k: int) -> "QuadConfig":
        return QuadConfig(
            stiffness=self.stiffness if self.stiffness is not None else max(1, 2 * k - 2),
            penalty=self.penalty if self.penalty is not None else 2 * k,
            rhs=self.rhs if self.rhs is not None else 2 * k,
        )


def averaging_weights(vol1: float, vol: float) -> tuple[float, float]:
    """Heaviside weights: the larger side gets weight one (ties go to side 1)."""
    k1 = 1.0 if vol1 >= 0.5 * vol else 0.0
    return k1, 1.0 - k1


@dataclass(eq=False)
class AssembledSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dirichlet_dofs: np.ndarray
    dirichlet_values: np.ndarray

    @property
    def n_dofs(self) -> int:
        return len(self.rhs)

    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return np.flatnonzero(mask)

    def reduced(self):
        """Eliminate Dirichlet dofs: returns ``(A_ff, b_f, free)``."""
        free = self.free_dofs()
        A = self.matrix.tocsr()
        g = np.zeros(self.n_dofs)
        g[self.dirichlet_dofs] = self.dirichlet_values
        b = self.rhs - A @ g
        Aff = A[free][:, free].tocsc()
        return Aff, b[free], free

    def expand(self, x_free: np.ndarray) -> np.ndarray:
        u = np.zeros(self.n_dofs)
        u[self.dirichlet_dofs] = self.dirichlet_values
        u[self.free_dofs()] = x_free
        return u


def _physical_gradients(mesh, elements, grad_ref, FinvT):
    A, _ = mesh.jacobians(elements)
    AinvT = np.swapaxes(np.linalg.inv(A), 1, 2)
    g = np.einsum("pij,pqnj->pqni", AinvT, grad_ref)
    return np.einsum("pqij,pqnj->pqni", FinvT, g)


def heaviside_weights(ct) -> np.ndarray:
    """(n_cut, 2) array of kappa_1, kappa_2 from the undeformed cut areas."""
    vol = ct.side_areas.sum(axis=1)
    k1 = (ct.side_areas[:, 0] >= 0.5 * vol).astype(float)
    return np.column_stack([k1, 1.0 - k1])


def assemble(space: UnfittedSpace, d, ct, pd: ProblemData, quad: QuadConfig | None = None,
             h: float | None = None) -> AssembledSystem:
    k = space.k
    mesh = space.mesh
    ref = space.space.ref
    q = (quad or QuadConfig()).resolve(k)
    h = mesh.h_max if h is None else h
    n = space.n_dofs
    rows, cols, vals = [], [], []
    b = np.zeros(n)

    # volume terms
    vb = mapped_volume_batch(ct, d, q.stiffness)
    _, gref = ref.evaluate(vb.ref)
    g = _physical_gradients(mesh, vb.elements, gref, vb.FinvT)
    alpha = np.where(vb.side == 1, pd.alpha[0], pd.alpha[1])
    Ke = np.einsum("pq,pqni,pqmi->pnm", vb.weights * alpha[:, None], g, g)
    dofs = np.where(vb.side[:, None] == 1, space.dof_map[1][vb.elements], space.dof_map[2][vb.elements])
    nl = ref.n_local
    rows.append(np.repeat(dofs, nl, axis=1).ravel())
    cols.append(np.tile(dofs, (1, nl)).ravel())
    vals.append(Ke.ravel())

    fb = mapped_volume_batch(ct, d, q.rhs)
    psi = ref.values(fb.ref)
    fdofs = np.where(fb.side[:, None] == 1, space.dof_map[1][fb.elements], space.dof_map[2][fb.elements])
    for s in SIDES:
        sel = fb.side == s
        if not sel.any() or pd.f.get(s) is None:  # missing source = zero
            continue
        fx = np.asarray(pd.f[s](fb.x[sel].reshape(-1, 2))).reshape(fb.weights[sel].shape)
        np.add.at(b, fdofs[sel], np.einsum("pq,pqn->pn", fb.weights[sel] * fx, psi[sel]))

    # interface terms
    if ct.n_cut:
        kap = heaviside_weights(ct)
        a1, a2 = pd.alpha
        idofs = np.concatenate([space.dof_map[1][ct.cut_elements], space.dof_map[2][ct.cut_elements]], axis=1)
        # consistency + symmetry, uncancelled form det F F^{-T} n^lin
        cb = mapped_interface_batch(ct, d, q.stiffness)
        psi, gref = ref.evaluate(cb.ref)
        g = _physical_gradients(mesh, cb.elements, gref, cb.FinvT)
        gn = np.einsum("pqni,pqi->pqn", g, cb.nu)
        flux = np.concatenate([-kap[:, :1, None] * a1 * gn, -kap[:, 1:, None] * a2 * gn], axis=2)
        jump = np.concatenate([psi, -psi], axis=2)
        C = np.einsum("pq,pqi,pqj->pij", cb.lin_weights, jump, flux)
        # penalty
        pb = mapped_interface_batch(ct, d, q.penalty)
        psi = ref.values(pb.ref)
        jump = np.concatenate([psi, -psi], axis=2)
        gamma = pd.alpha_mean * pd.penalty(k) / h
        P = gamma * np.einsum("pq,pqi,pqj->pij", pb.weights, jump, jump)
        Ie = C + np.swapaxes(C, 1, 2) + P
        m2 = 2 * nl
        rows.append(np.repeat(idofs, m2, axis=1).ravel())
        cols.append(np.tile(idofs, (1, m2)).ravel())
        vals.append(Ie.ravel())

    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()

    ddofs, dnodes, dsides = space.dirichlet_dofs()
    if len(dnodes) and np.any(d.disp[dnodes] != 0.0):
        raise BoundaryConflict("deformation is not the identity on the Dirichlet boundary")
    gvals = np.zeros(len(ddofs))
    for s in SIDES:
        sel = dsides == s
        if sel.any():
            gfun = pd.dirichlet(s)
            if gfun is None:
                continue
            gvals[sel] = gfun(space.space.node_coords[dnodes[sel]])
    return AssembledSystem(A, b, ddofs, gvals)


def bilinear_form(sys: AssembledSystem, u, v) -> float:
    return float(v @ (sys.matrix @ u))


# ----------------------------------------------------------- inverse estimate

def inverse_constant(k: int, d: int = 2, c_kappa: float = 2.0) -> float:
    """c_{k,d} = c_kappa d! 2^{(d-1)/2} (k + d)(k + 1)."""
    return c_kappa * factorial(d) * 2 ** ((d - 1) / 2) * (k + d) * (k + 1)


def _reference_cut_masses(ct, row: int, side: int, k: int):
    """Interface and side mass matrices of P^k on the reference element."""
    from .fe import reference_element

    ref = reference_element(k)
    seg = ct.segments[row]
    sr = segment_rule(2 * k)
    spts = seg[0] + sr.points[:, None] * (seg[1] - seg[0])
    slen = np.linalg.norm(seg[1] - seg[0])
    psi = ref.values(spts)
    Mg = slen * np.einsum("q,qi,qj->ij", sr.weights, psi, psi)
    tris = ct.subtris[row][ct.subside[row] == side]
    pts, w = subtriangle_points(tris, triangle_rule(2 * k))
    psi = ref.values(pts.reshape(-1, 2))
    Mt = np.einsum("q,qi,qj->ij", w.ravel(), psi, psi)
    vol = np.abs(np.sum(w))
    return Mg, Mt, vol


def _kappa(ct, row: int, side: int) -> float:
    k1, k2 = averaging_weights(ct.side_areas[row, 0], ct.side_areas[row].sum())
    return k1 if side == 1 else k2


def inverse_estimate_probe(space: UnfittedSpace, ct, element: int, side: int, trials: int = 100,
                           rng=None) -> float:
    """Max over random p in P^k of kappa^2 ||p||^2_Gamma / ||p||^2_{T_side}
    on the reference configuration of ``element``."""
    rng = np.random.default_rng(rng)
    row = ct.cut_index()[element]
    if row < 0:
        raise ValueError(f"element {element} is not cut")
    kap = _kappa(ct, row, side)
    if kap == 0.0:
        return 0.0
    Mg, Mt, _ = _reference_cut_masses(ct, row, side, space.k)
    c = rng.standard_normal((trials, Mg.shape[0]))
    num = np.einsum("ti,ij,tj->t", c, Mg, c)
    den = np.einsum("ti,ij,tj->t", c, Mt, c)
    return float(kap**2 * np.max(num / den))


def inverse_estimate_sup(space: UnfittedSpace, ct, element: int, side: int) -> float:
    """Exact supremum of the probe ratio (largest generalized eigenvalue)."""
    from scipy.linalg import eigh

    row = ct.cut_index()[element]
    kap = _kappa(ct, row, side)
    if kap == 0.0:
        return 0.0
    Mg, Mt, _ = _reference_cut_masses(ct, row, side, space.k)
    return float(kap**2 * eigh(Mg, Mt, eigvals_only=True)[-1])


__all__ = [
    "AssembledSystem",
    "ProblemData",
    "QuadConfig",
    "assemble",
    "averaging_weights",
    "bilinear_form",
    "heaviside_weights",
    "inverse_constant",
    "inverse_estimate_probe",
    "inverse_estimate_sup",
]
