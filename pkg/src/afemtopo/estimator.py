"""Residual indicators for the phase-field optimality condition and the state equation."""
from dataclasses import dataclass

import numpy as np

from . import fespace as fe
from .mesh import INTERIOR, OUTLET, TAGS
from .quadrature import EDGE_GAUSS3, TRI_ORDER6, edge_points, tri_points
from .stokes import double_well_prime, phase_at


@dataclass(frozen=True)
class Indicators:
    """Squared per-element indicators and the global estimator ``sqrt(sum)``."""
    eta_sq: np.ndarray

    @property
    def total(self):
        return float(np.sqrt(np.sum(self.eta_sq)))

    def __len__(self):
        return len(self.eta_sq)


def _to_elements(mesh, edge_vals, weights=(1.0, 1.0)):
    """Distribute per-edge values to the incident elements with side weights (T+, T-)."""
    out = np.zeros(mesh.n_elements)
    for side, w in enumerate(weights):
        t = mesh.edge_elems[:, side]
        ok = t >= 0
        np.add.at(out, t[ok], w * edge_vals[ok])
    return out


def eta1(mesh, phi, u, params, rule=TRI_ORDER6):
    """Phase-field indicator.

    Element residual ``(gamma/eps) f'(phi) + 1/2 alpha'(phi)|u|^2`` weighted by
    ``h_T^2``; flux jumps ``gamma*eps [grad phi].n`` weighted by ``h_F`` and
    counted in full on both incident elements (``grad phi . n`` on the boundary).
    """
    phi_q, comp_q = phase_at(mesh, phi, rule)
    speed2 = np.sum(fe.cr_at(mesh, u, rule) ** 2, axis=-1)
    R = (params.gamma / params.epsilon * double_well_prime(phi_q, comp_q)
         + 0.5 * params.dalpha(phi_q, comp_q) * speed2)
    elem = mesh.h_elem ** 2 * fe.integrate(mesh, R ** 2, rule)

    grad = fe.p1_gradient(mesh, phi)
    n = mesh.edge_normals
    plus, minus = mesh.edge_elems[:, 0], mesh.edge_elems[:, 1]
    flux = np.einsum("ed,ed->e", grad[plus], n)
    inner = minus >= 0
    flux[inner] -= np.einsum("ed,ed->e", grad[minus[inner]], n[inner])
    J = params.gamma * params.epsilon * flux
    # J is constant along the edge: h_F * |F| * J^2
    face = mesh.edge_lengths ** 2 * J ** 2
    return Indicators(elem + _to_elements(mesh, face))


def boundary_mismatch_sq(mesh, u, bc, rule=EDGE_GAUSS3):
    """``||u - g||^2_{L2(F)}`` on every Dirichlet boundary edge (zero elsewhere)."""
    out = np.zeros(mesh.n_edges)
    dg = fe.cr_to_dg(mesh, u)
    traces = fe.edge_traces(mesh, dg)[:, 0]  # (nE, endpoint, 2) from T+
    s, w = rule
    for tag in bc.dirichlet_tags:
        ids = np.flatnonzero(mesh.edge_tags == TAGS.index(tag))
        if len(ids) == 0:
            continue
        pts = edge_points(mesh.vertices, mesh.edges[ids], rule)
        g = bc.g(pts[..., 0], pts[..., 1], tag)
        uh = fe._along_edge(traces[ids], s)
        out[ids] = mesh.edge_lengths[ids] * np.einsum("q,eqc->e", w, (uh - g) ** 2)
    return out


def eta2(mesh, phi, u, params, bc, rule=TRI_ORDER6):
    """State indicator.

    ``h_T^2 ||alpha(phi) u - f||^2`` plus half of ``h_F ||[u]||^2`` for each
    interior edge of the element plus ``h_F ||u - g||^2`` on Dirichlet edges.
    Outlet edges carry no term.
    """
    r = params.alpha(*phase_at(mesh, phi, rule))[..., None] * fe.cr_at(mesh, u, rule)
    if params.body_force is not None:
        pts = tri_points(mesh.vertices, mesh.elements, rule)
        r = r - np.broadcast_to(np.asarray(params.body_force(pts[..., 0], pts[..., 1]), float), r.shape)
    elem = mesh.h_elem ** 2 * fe.integrate(mesh, np.sum(r ** 2, axis=-1), rule)

    inner = mesh.edge_elems[:, 1] >= 0
    jump = np.where(inner, fe.edge_jump_sq(mesh, fe.cr_to_dg(mesh, u)), 0.0)
    face = 0.5 * mesh.edge_lengths * jump
    bnd = mesh.edge_lengths * boundary_mismatch_sq(mesh, u, bc)
    bnd[(mesh.edge_tags == OUTLET) | (mesh.edge_tags == INTERIOR)] = 0.0
    return Indicators(elem + _to_elements(mesh, face) + _to_elements(mesh, bnd, (1.0, 0.0)))
