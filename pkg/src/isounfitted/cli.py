"""Command line: ``run --config FILE [--out DIR] [--svg]`` and ``self-test``."""
from __future__ import annotations

import argparse
import logging
import math
import sys

from .config import load_config
from .experiment import run_convergence
from .selftest import self_test


def _fmt(v):
    return "-" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.2f}"


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    reports = run_convergence(cfg, out_dir=args.out, svg=args.svg)
    failed = False
    for k, rep in reports.items():
        for L, e in enumerate(rep.levels):
            o = rep.eocs[L - 1] if L else {}
            print(f"k={k} L={L} dofs={e.dofs:7d} d={e.d_gammah:.3e} ({_fmt(o.get('d_gammah'))}) "
                  f"L2={e.e_L2:.3e} ({_fmt(o.get('e_L2'))}) H1={e.e_H1:.3e} ({_fmt(o.get('e_H1'))}) "
                  f"jump={e.e_jump:.3e} ({_fmt(o.get('e_jump'))})")
        if rep.failure:
            failed = True
            print(f"k={k} aborted at {rep.failure}", file=sys.stderr)
    return 1 if failed else 0


def _cmd_self_test(args) -> int:
    ok, results = self_test(lambda_factor=args.lambda_factor, quad_degree=args.quad_degree)
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    print("self-test", "passed" if ok else "FAILED")
    return 0 if ok else 1


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="isounfitted", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="convergence study from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None, help="output directory (overrides out_dir)")
    r.add_argument("--svg", action="store_true", help="write geometry SVG per level")
    r.set_defaults(func=_cmd_run)
    s = sub.add_parser("self-test", help="run small-scale invariant checks")
    s.add_argument("--lambda-factor", type=float, default=20.0, help=argparse.SUPPRESS)
    s.add_argument("--quad-degree", type=int, default=None, help=argparse.SUPPRESS)
    s.set_defaults(func=_cmd_self_test)
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
