#!/usr/bin/env python3
"""Geometry-only study: d_Gamma_h, area and perimeter of the deformed sides.

Needs no linear solves, so it reaches finer levels than the full benchmark.
    python scripts/geometry_convergence.py [--levels 5] [--k 1 2 3 4]
"""
import argparse
from math import gamma

import numpy as np

from isounfitted import (
    build_structured_mesh,
    build_theta,
    classify_cut,
    interpolate_levelset,
    refine_uniform,
    search_direction,
    smoothed_square,
)
from isounfitted.metrics import interface_sup
from isounfitted.quadrature import mapped_interface_batch, mapped_volume_batch

AREA = 4 * gamma(1.25) ** 2 / gamma(1.5)  # area enclosed by x^4 + y^4 = 1


def perimeter(n: int = 400000) -> float:
    """Length of x^4 + y^4 = 1 from a fine inscribed polygon."""
    th = np.linspace(0.0, 2 * np.pi, n + 1)
    c, s = np.cos(th), np.sin(th)
    r = (c**4 + s**4) ** -0.25
    x = np.column_stack([r * c, r * s])
    return float(np.linalg.norm(np.diff(x, axis=0), axis=1).sum())


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--k", type=int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--n0", type=int, default=8)
    args = p.parse_args()
    pb = smoothed_square()
    perim = perimeter()
    for k in args.k:
        print(f"\nk = {k}\n L   d_Gamma_h   eoc   |area err|   eoc  |perim err|   eoc")
        m = build_structured_mesh(pb.box, args.n0)
        prev = None
        for L in range(args.levels):
            if L:
                m = refine_uniform(m)
            ls = interpolate_levelset(pb.phi, m, k)
            ct = classify_cut(ls, m)
            d = build_theta(ls, search_direction(ls, ct), ct)
            dg = interface_sup(pb.phi, ct, d, 2 * k + 2)
            area = mapped_volume_batch(ct, d, 2 * k, side=1).weights.sum()
            ea = abs(area - AREA)
            ep = abs(mapped_interface_batch(ct, d, 2 * k + 2).weights.sum() - perim)
            cur = (dg, ea, ep)
            cols = [f"{v:10.3e} " + ("  -  " if prev is None else f"{np.log2(q / v):5.2f}")
                    for v, q in zip(cur, prev or cur)]
            print(f"{L:2d}  " + "  ".join(cols))
            prev = cur


if __name__ == "__main__":
    main()
