"""Convergence driver, CSV tables and SVG geometry export."""
from __future__ import annotations

import importlib
import logging
import os
from dataclasses import dataclass

import numpy as np

from .benchmark import PROBLEMS, InterfaceProblem
from .config import RunConfig
from .deform import Deformation, build_theta, search_direction
from .exceptions import IsoUnfittedError
from .fe import build_unfitted_space
from .levelset import CutTopology, classify_cut, interpolate_levelset
from .mesh import Mesh, build_structured_mesh, refine_uniform
from .metrics import ErrorReport, LevelErrors, compute_errors
from .nitsche import QuadConfig, assemble
from .solver import SolveReport, solve_system

log = logging.getLogger(__name__)

CSV_HEADER = "k,L,dofs,h,d_gammah,eoc_d,e_L2,eoc_L2,e_H1,eoc_H1,e_jump,eoc_jump"


def load_problem(cfg: RunConfig) -> InterfaceProblem:
    name = cfg.problem
    if ":" in name:
        mod, attr = name.split(":", 1)
        factory = getattr(importlib.import_module(mod), attr)
    elif name in PROBLEMS:
        factory = PROBLEMS[name]
    else:
        raise ValueError(f"unknown problem {name!r}")
    return factory(alpha=tuple(cfg.alpha), lambda_factor=cfg.lambda_factor)


@dataclass(eq=False)
class LevelResult:
    mesh: Mesh
    cut: CutTopology
    deformation: Deformation
    solution: np.ndarray
    solve: SolveReport
    errors: LevelErrors


def solve_level(problem: InterfaceProblem, mesh: Mesh, k: int, cfg: RunConfig | None = None) -> LevelResult:
    """Level set -> cut -> Theta_h -> assembly -> solve -> errors on one mesh."""
    cfg = cfg or RunConfig()
    ls = interpolate_levelset(problem.phi, mesh, k)
    ct = classify_cut(ls, mesh)
    gh = search_direction(ls, ct, cfg.search_direction)
    d = build_theta(ls, gh, ct, alpha0=cfg.alpha0, tol=cfg.newton_tol)
    space = build_unfitted_space(mesh, ct, k)
    quad = QuadConfig(cfg.quad_stiffness, cfg.quad_penalty, cfg.quad_rhs)
    system = assemble(space, d, ct, problem.data, quad)
    u, rep = solve_system(system, require_positive=True)
    errs = compute_errors(u, space, d, ct, problem.u, problem.grad_u, problem.phi, cfg.error_degree)
    return LevelResult(mesh, ct, d, u, rep, errs)


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def csv_rows(report: ErrorReport) -> list[str]:
    rows = []
    for L, e in enumerate(report.levels):
        o = report.eocs[L - 1] if L else {}
        rows.append(",".join([
            str(report.k), str(L), str(e.dofs), _fmt(e.h),
            _fmt(e.d_gammah), _fmt(o.get("d_gammah")),
            _fmt(e.e_L2), _fmt(o.get("e_L2")),
            _fmt(e.e_H1), _fmt(o.get("e_H1")),
            _fmt(e.e_jump), _fmt(o.get("e_jump")),
        ]))
    return rows


def write_csv(reports, path) -> None:
    lines = [CSV_HEADER]
    for rep in reports:
        lines += csv_rows(rep)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def run_convergence(cfg: RunConfig, out_dir: str | None = None, svg: bool = False,
                    write: bool = True) -> dict[int, ErrorReport]:
    """Uniform refinement study for every k in the config.

    A failing level stops refinement for that k; the levels computed so far
    are kept and the failure is recorded in ``ErrorReport.failure``.
    """
    problem = load_problem(cfg)
    box = cfg.box if cfg.box is not None else problem.box
    out_dir = cfg.out_dir if out_dir is None else out_dir
    reports = {}
    for k in cfg.k:
        rep = ErrorReport(k)
        mesh = build_structured_mesh(box, cfg.n0, cfg.diagonal)
        for L in range(cfg.levels_for(k)):
            if L:
                mesh = refine_uniform(mesh)
            try:
                res = solve_level(problem, mesh, k, cfg)
            except IsoUnfittedError as exc:
                rep.failure = f"L={L}: {type(exc).__name__}: {exc}"
                log.error("k=%d %s", k, rep.failure)
                break
            rep.add(res.errors)
            log.info("k=%d L=%d dofs=%d e_H1=%.3e", k, L, res.errors.dofs, res.errors.e_H1)
            if svg and write:
                os.makedirs(out_dir, exist_ok=True)
                export_geometry(res.cut, res.deformation, os.path.join(out_dir, cfg.svg.format(k=k, L=L)))
        reports[k] = rep
    if write:
        os.makedirs(out_dir, exist_ok=True)
        write_csv(reports.values(), os.path.join(out_dir, cfg.csv))
    return reports


# ---------------------------------------------------------------- SVG export

def interface_samples(ct: CutTopology, d: Deformation, n: int = 10):
    """Gamma^lin and Gamma_h sampled at ``n`` points per segment, (n_cut, n, 2) each."""
    t = np.linspace(0.0, 1.0, n)
    seg = ct.segments
    ref = seg[:, None, 0, :] * (1.0 - t[None, :, None]) + seg[:, None, 1, :] * t[None, :, None]
    if ct.n_cut == 0:
        empty = np.zeros((0, n, 2))
        return empty, empty
    A, b = ct.mesh.jacobians(ct.cut_elements)
    lin = np.einsum("pij,pqj->pqi", A, ref) + b[:, None, :]
    return lin, d.map(ct.cut_elements, ref)


def _path(points) -> str:
    return "M " + " L ".join(f"{x:.9g} {y:.9g}" for x, y in points)


def export_geometry(ct: CutTopology, d: Deformation, path, samples: int = 10) -> None:
    """Plain SVG 1.1: mesh edges (gray), Gamma^lin (blue), Gamma_h (red)."""
    m = ct.mesh
    lo, hi = m.vertices.min(axis=0), m.vertices.max(axis=0)
    w, h = hi - lo
    pad = 0.02 * max(w, h)
    scale = 800.0 / max(w, h)
    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{(w + 2 * pad) * scale:.9g}" height="{(h + 2 * pad) * scale:.9g}" '
        f'viewBox="{lo[0] - pad:.9g} {-hi[1] - pad:.9g} {w + 2 * pad:.9g} {h + 2 * pad:.9g}">',
        '<g transform="scale(1,-1)" fill="none">',
        f'<g stroke="gray" stroke-width="{0.5 / scale:.9g}">',
    ]
    for a, b in m.edges:
        (x0, y0), (x1, y1) = m.vertices[a], m.vertices[b]
        out.append(f'<line x1="{x0:.9g}" y1="{y0:.9g}" x2="{x1:.9g}" y2="{y1:.9g}"/>')
    out.append("</g>")
    lin, curved = interface_samples(ct, d, samples)
    if len(lin):
        out.append(f'<g stroke="blue" stroke-width="{1.0 / scale:.9g}">')
        out += [f'<path d="{_path(p[[0, -1]])}"/>' for p in lin]
        out.append("</g>")
        out.append(f'<g stroke="red" stroke-width="{1.0 / scale:.9g}">')
        out += [f'<path d="{_path(p)}"/>' for p in curved]
        out.append("</g>")
    out += ["</g>", "</svg>"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
