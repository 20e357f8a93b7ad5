"""Reference problems: the smoothed-square interface and a planar patch test."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nitsche import ProblemData

PI = np.pi
SQ2 = np.sqrt(2.0)


def norm4(x):
    x = np.asarray(x, dtype=float)
    return (x[..., 0] ** 4 + x[..., 1] ** 4) ** 0.25


@dataclass
class InterfaceProblem:
    """Level set, exact per-side solution with gradients, and problem data."""

    name: str
    box: tuple
    phi: object
    grad_phi: object
    u: dict
    grad_u: dict
    data: ProblemData


def _u1(x):
    s = x[..., 0] ** 4 + x[..., 1] ** 4
    return 1.0 + PI / 2 - SQ2 * np.cos(PI / 4 * s)


def _grad_u1(x):
    s = x[..., 0] ** 4 + x[..., 1] ** 4
    c = SQ2 * PI * np.sin(PI / 4 * s)
    return np.stack([c * x[..., 0] ** 3, c * x[..., 1] ** 3], axis=-1)


def _lap_u1(x):
    X, Y = x[..., 0], x[..., 1]
    s = X**4 + Y**4
    return SQ2 * PI * (PI * np.cos(PI / 4 * s) * (X**6 + Y**6) + 3 * np.sin(PI / 4 * s) * (X**2 + Y**2))


def _u2(x):
    return PI / 2 * norm4(x)


def _grad_u2(x):
    s = x[..., 0] ** 4 + x[..., 1] ** 4
    c = PI / 2 * s ** (-0.75)
    return np.stack([c * x[..., 0] ** 3, c * x[..., 1] ** 3], axis=-1)


def _lap_u2(x):
    X, Y = x[..., 0], x[..., 1]
    s = X**4 + Y**4
    return PI / 2 * (3 * (X**2 + Y**2) * s ** (-0.75) - 3 * (X**6 + Y**6) * s ** (-1.75))


def smoothed_square(alpha=(1.0, 2.0), lambda_factor: float = 20.0) -> InterfaceProblem:
    """phi = ||x||_4 - 1 on [-1.5, 1.5]^2 with a kinked exact solution."""
    a1, a2 = alpha

    def phi(x):
        return norm4(x) - 1.0

    def grad_phi(x):
        s = x[..., 0] ** 4 + x[..., 1] ** 4
        c = s ** (-0.75)
        return np.stack([c * x[..., 0] ** 3, c * x[..., 1] ** 3], axis=-1)

    data = ProblemData(
        alpha=(a1, a2),
        f={1: lambda x: -a1 * _lap_u1(x), 2: lambda x: -a2 * _lap_u2(x)},
        g_dirichlet=_u2,
        lambda_factor=lambda_factor,
    )
    return InterfaceProblem(
        "smoothed_square", (-1.5, 1.5, -1.5, 1.5), phi, grad_phi,
        {1: _u1, 2: _u2}, {1: _grad_u1, 2: _grad_u2}, data,
    )


def planar_patch(alpha=(1.0, 2.0), normal=(0.8, 0.6), offset: float = 0.53,
                 lambda_factor: float = 20.0) -> InterfaceProblem:
    """Straight interface ``n.x = offset`` in the unit square with a
    piecewise linear solution whose flux is continuous across it."""
    a1, a2 = alpha
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    t = np.array([-n[1], n[0]])
    slope = {1: 1.0 / a1, 2: 1.0 / a2}

    def phi(x):
        return x @ n - offset

    def grad_phi(x):
        return np.broadcast_to(n, np.shape(x)).copy()

    def make_u(s):
        return lambda x: slope[s] * (x @ n - offset) + 0.7 * (x @ t) + 1.0

    def make_grad(s):
        g = slope[s] * n + 0.7 * t
        return lambda x: np.broadcast_to(g, np.shape(x)).copy()

    u = {1: make_u(1), 2: make_u(2)}
    zero = lambda x: np.zeros(np.shape(x)[:-1])  # noqa: E731
    data = ProblemData(alpha=(a1, a2), f={1: zero, 2: zero}, g_dirichlet=dict(u), lambda_factor=lambda_factor)
    return InterfaceProblem(
        "planar", (0.0, 1.0, 0.0, 1.0), phi, grad_phi, u, {1: make_grad(1), 2: make_grad(2)}, data,
    )


PROBLEMS = {"benchmark": smoothed_square, "smoothed_square": smoothed_square, "planar": planar_patch}
