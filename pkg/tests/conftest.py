import numpy as np
import pytest

from isounfitted import (
    build_structured_mesh,
    build_theta,
    classify_cut,
    interpolate_levelset,
    search_direction,
    smoothed_square,
)


@pytest.fixture(scope="session")
def bench():
    return smoothed_square()


def setup_geometry(phi, box, n, k, diagonal="rows"):
    m = build_structured_mesh(box, n, diagonal)
    ls = interpolate_levelset(phi, m, k)
    ct = classify_cut(ls, m)
    d = build_theta(ls, search_direction(ls, ct), ct)
    return m, ls, ct, d


@pytest.fixture(scope="session")
def bench_k2(bench):
    return setup_geometry(bench.phi, bench.box, 8, 2)


def norm4_curve(n):
    """Points on ||x||_4 = 1, parametrized by angle."""
    th = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    c, s = np.cos(th), np.sin(th)
    r = (c**4 + s**4) ** -0.25
    return np.column_stack([r * c, r * s])
