"""Run configuration with a flat ``key = value`` text format.

Grammar: one ``key = value`` pair per line; ``#`` starts a comment; blank
lines are ignored. Lists are comma separated, ``none`` means "use the
default for this k". Unknown keys are an error.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

DEFAULT_LEVELS = {1: 6, 2: 4, 3: 3}


def default_levels(k: int) -> int:
    return DEFAULT_LEVELS.get(k, 2)


@dataclass
class RunConfig:
    problem: str = "benchmark"  # benchmark | planar | module:factory
    box: tuple | None = None  # None: the problem's own domain
    n0: int = 8
    diagonal: str = "rows"
    k: tuple = (1, 2, 3)
    levels: int | None = None  # None: per-k default
    lambda_factor: float = 20.0
    alpha: tuple = (1.0, 2.0)
    search_direction: str = "gradient"
    quad_stiffness: int | None = None
    quad_penalty: int | None = None
    quad_rhs: int | None = None
    error_degree: int | None = None
    alpha0: float = 0.5
    newton_tol: float = 1e-14
    out_dir: str = "results"
    csv: str = "convergence.csv"
    svg: str = "geometry_k{k}_L{L}.svg"

    def __post_init__(self):
        self.k = tuple(int(v) for v in (self.k if isinstance(self.k, (tuple, list)) else (self.k,)))
        if not self.k or min(self.k) < 1:
            raise ValueError("k must be >= 1")
        if self.levels is not None and self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.n0 < 1:
            raise ValueError("n0 must be >= 1")
        if self.lambda_factor <= 0:
            raise ValueError("lambda_factor must be positive")
        if self.search_direction not in ("gradient", "projected"):
            raise ValueError(f"unknown search direction {self.search_direction!r}")
        if self.box is not None and len(self.box) != 4:
            raise ValueError("box needs four numbers x0, x1, y0, y1")
        if len(self.alpha) != 2:
            raise ValueError("alpha needs two values")

    def levels_for(self, k: int) -> int:
        return self.levels if self.levels is not None else default_levels(k)


_INT = {"n0", "levels", "quad_stiffness", "quad_penalty", "quad_rhs", "error_degree"}
_FLOAT = {"lambda_factor", "alpha0", "newton_tol"}
_FLOAT_TUPLE = {"box", "alpha"}
_INT_TUPLE = {"k"}
_KEYS = [f.name for f in fields(RunConfig)]


def _parse_value(key, text):
    text = text.strip()
    if text.lower() in ("none", "auto", ""):
        if key in _INT | _FLOAT_TUPLE:
            return None
    if key in _INT:
        return int(text)
    if key in _FLOAT:
        return float(text)
    if key in _FLOAT_TUPLE:
        return tuple(float(v) for v in text.split(","))
    if key in _INT_TUPLE:
        return tuple(int(v) for v in text.split(","))
    return text


def _format_value(v):
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, val)
    return RunConfig(**values)


def format_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {_format_value(getattr(cfg, k))}\n" for k in _KEYS)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
