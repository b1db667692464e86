"""Manufactured Stokes solution on the unit square for convergence checks.

``u = curl psi`` with ``psi = x^2 (1-x)^2 y^2 (1-y)^2`` and ``p = x^3 - 1/4``;
the body force is derived symbolically.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy

from . import fespace as fe
from .estimator import eta2
from .mesh import build_rect_mesh, uniform_refine
from .quadrature import TRI_ORDER6, tri_points
from .stokes import PhysParams, VelocityBC, assemble, solve_state

WALLS = [("wall", lambda x, y: np.ones_like(x, dtype=bool))]


@lru_cache(maxsize=None)
def _fields(mu=1.0):
    x, y = sympy.symbols("x y")
    psi = x ** 2 * (1 - x) ** 2 * y ** 2 * (1 - y) ** 2
    u = [sympy.diff(psi, y), -sympy.diff(psi, x)]
    p = x ** 3 - sympy.Rational(1, 4)
    f = [-mu * (sympy.diff(c, x, 2) + sympy.diff(c, y, 2)) + sympy.diff(p, v) for c, v in zip(u, (x, y))]
    grad = [[sympy.diff(c, v) for v in (x, y)] for c in u]
    lam = lambda e: sympy.lambdify((x, y), e, "numpy")
    return lam(u), lam(p), lam(f), lam(grad)


def _vector(fun):
    def call(x, y):
        vals = fun(x, y)
        return np.stack(np.broadcast_arrays(*vals, x), axis=-1)[..., :-1]
    return call


def velocity(x, y):
    return _vector(_fields()[0])(x, y)


def pressure(x, y):
    return np.broadcast_to(_fields()[1](x, y), np.shape(x))


def body_force(x, y):
    return _vector(_fields()[2])(x, y)


def velocity_gradient(x, y):
    g = _fields()[3](x, y)
    return np.stack([np.stack(np.broadcast_arrays(*row, x)[:-1], axis=-1) for row in g], axis=-2)


@dataclass
class LevelErrors:
    h: float
    n_elements: int
    l2: float
    energy: float
    pressure_l2: float
    eta2: float
    residual: float
    max_div: float


def errors(mesh, u, p):
    """(L2 velocity error, broken H1 seminorm error, L2 pressure error) by order-6 quadrature."""
    pts = tri_points(mesh.vertices, mesh.elements, TRI_ORDER6)
    x, y = pts[..., 0], pts[..., 1]
    e = fe.cr_at(mesh, u, TRI_ORDER6) - velocity(x, y)
    l2 = np.sqrt(fe.integrate(mesh, np.sum(e ** 2, axis=-1), TRI_ORDER6).sum())
    eg = fe.cr_gradient(mesh, u)[:, None] - velocity_gradient(x, y)
    h1 = np.sqrt(fe.integrate(mesh, np.sum(eg ** 2, axis=(-1, -2)), TRI_ORDER6).sum())
    ep = p[:, None] - pressure(x, y)
    pl2 = np.sqrt(fe.integrate(mesh, ep ** 2, TRI_ORDER6).sum())
    return float(l2), float(h1), float(pl2)


def convergence_study(levels=4, n0=4, solver="direct"):
    """Solve on ``levels`` uniformly refined meshes; returns a list of ``LevelErrors``."""
    params = PhysParams(alpha_max=0.0, body_force=body_force)
    bc = VelocityBC()
    mesh = build_rect_mesh(((0.0, 1.0), (0.0, 1.0)), n0, n0, WALLS)
    phi_one = None
    out = []
    for _ in range(levels):
        phi_one = np.ones(mesh.n_vertices)
        u, p, res = solve_state(assemble(mesh, phi_one, params, bc), method=solver)
        l2, h1, pl2 = errors(mesh, u, p)
        unorm = max(fe.cr_energy_norm(mesh, u), np.finfo(float).tiny)
        out.append(LevelErrors(
            h=float(mesh.h_edge.max()), n_elements=mesh.n_elements, l2=l2, energy=h1, pressure_l2=pl2,
            eta2=eta2(mesh, phi_one, u, params, bc).total, residual=res,
            max_div=float(np.abs(fe.cr_divergence(mesh, u)).max() / unorm),
        ))
        mesh = uniform_refine(mesh)
    return out


def fitted_rate(h, err):
    """Least-squares slope of log(err) against log(h)."""
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])
