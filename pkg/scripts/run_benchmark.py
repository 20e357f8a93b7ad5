#!/usr/bin/env python3
"""Convergence study on the smoothed-square benchmark.

    python scripts/run_benchmark.py [--config scripts/configs/benchmark.cfg] [--svg]

Writes convergence.csv (and SVGs) to the config's out_dir and prints the
error/eoc table.
"""
import argparse
import logging
import os

from isounfitted import load_config, run_convergence

HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=os.path.join(HERE, "configs", "benchmark.cfg"))
    p.add_argument("--out", default=None)
    p.add_argument("--svg", action="store_true")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = load_config(args.config)
    reports = run_convergence(cfg, out_dir=args.out, svg=args.svg)
    for k, rep in reports.items():
        print(f"\nk = {k}")
        print(f"{'L':>2} {'dofs':>7} {'d_Gamma_h':>10} {'eoc':>5} {'e_L2':>10} {'eoc':>5} "
              f"{'e_H1':>10} {'eoc':>5} {'e_jump':>10} {'eoc':>5}")
        for L, e in enumerate(rep.levels):
            o = rep.eocs[L - 1] if L else {}
            cells = []
            for q in ("d_gammah", "e_L2", "e_H1", "e_jump"):
                r = o.get(q)
                cells.append(f"{getattr(e, q):10.3e} {'' if r is None else f'{r:5.2f}':>5}")
            print(f"{L:2d} {e.dofs:7d} " + " ".join(cells))
        if rep.failure:
            print(f"stopped: {rep.failure}")
    print(f"\ntable written to {os.path.join(args.out or cfg.out_dir, cfg.csv)}")


if __name__ == "__main__":
    main()
