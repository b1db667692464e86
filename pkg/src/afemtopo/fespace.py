"""Discrete spaces: conforming P1, Crouzeix-Raviart P1 and piecewise constants.

Field layouts used throughout the package:

* phase field ``phi``: nodal values, shape ``(n_vertices,)``
* CR velocity ``u``: edge-midpoint values, shape ``(n_edges, 2)``
* pressure ``p``: element values, shape ``(n_elements,)``

The CR basis function attached to local edge ``i`` is ``1 - 2*lambda_i``.
"""
import numpy as np
import scipy.sparse as sp

from .mesh import INTERIOR, LineageError, TAGS
from .quadrature import EDGE_GAUSS3, TRI_ORDER4, edge_points


# --- evaluation ---------------------------------------------------------------

def p1_at(mesh, phi, rule=TRI_ORDER4):
    """P1 field at the quadrature points, shape (n_elements, n_points)."""
    bary, _ = rule
    return phi[mesh.elements] @ bary.T


def cr_local(mesh, u):
    """Element-local CR dofs, shape (n_elements, 3, 2)."""
    return u[mesh.elem_edges]


def cr_at(mesh, u, rule=TRI_ORDER4):
    """CR field at the quadrature points, shape (n_elements, n_points, 2)."""
    bary, _ = rule
    psi = 1.0 - 2.0 * bary  # (nq, 3)
    return np.einsum("qi,tic->tqc", psi, cr_local(mesh, u))


def cr_to_dg(mesh, u):
    """Vertex values of the element-local linear functions, shape (n_elements, 3, 2)."""
    loc = cr_local(mesh, u)
    return loc.sum(axis=1, keepdims=True) - 2.0 * loc


def cr_gradient(mesh, u):
    """Broken gradient, shape (n_elements, 2, 2) indexed [t, component, direction]."""
    return -2.0 * np.einsum("tic,tid->tcd", cr_local(mesh, u), mesh.grad_lambda)


def cr_divergence(mesh, u):
    """Piecewise-constant broken divergence."""
    g = cr_gradient(mesh, u)
    return g[:, 0, 0] + g[:, 1, 1]


def integrate(mesh, values, rule=TRI_ORDER4):
    """Integral of quadrature-point data of shape (n_elements, n_points, ...) per element."""
    _, w = rule
    return np.einsum("q,tq...->t...", w, values) * mesh.areas.reshape((-1,) + (1,) * (values.ndim - 2))


def p1_integral(mesh, phi):
    return float(np.sum(phi[mesh.elements].mean(axis=1) * mesh.areas))


# --- norms --------------------------------------------------------------------

def cr_l2_norm(mesh, u):
    return float(np.sqrt(integrate(mesh, np.sum(cr_at(mesh, u) ** 2, axis=-1)).sum()))


def cr_energy_norm(mesh, u):
    """Broken H1 seminorm ``||grad_T u||``."""
    g = cr_gradient(mesh, u)
    return float(np.sqrt(np.sum(mesh.areas * np.sum(g ** 2, axis=(1, 2)))))


def cr_lp_norm(mesh, u, p):
    vals = np.sum(cr_at(mesh, u) ** 2, axis=-1) ** (p / 2)
    return float(integrate(mesh, vals).sum() ** (1.0 / p))


# --- edge traces and jumps ------------------------------------------------------

def _local_index(mesh, elems, verts):
    return np.argmax(mesh.elements[elems] == verts[:, None], axis=1)


def edge_traces(mesh, dg):
    """Endpoint values of a broken P1 field on every edge, seen from both sides.

    ``dg`` holds element vertex values, shape (n_elements, 3, ...). Returns an
    array of shape (n_edges, 2, 2, ...) indexed [edge, side, endpoint]; side 0
    is T+ and side 1 is T- (zero on boundary edges).
    """
    nE = mesh.n_edges
    out = np.zeros((nE, 2, 2) + dg.shape[2:])
    for side in range(2):
        t = mesh.edge_elems[:, side]
        ok = t >= 0
        for end in range(2):
            li = _local_index(mesh, t[ok], mesh.edges[ok, end])
            out[ok, side, end] = dg[t[ok], li]
    return out


def _along_edge(ends, s):
    """Linear interpolation of endpoint values (n_edges, 2, C) to edge points."""
    return (1 - s)[None, :, None] * ends[:, 0, None, :] + s[None, :, None] * ends[:, 1, None, :]


def edge_jumps(mesh, dg):
    """Jump ``v|T+ - v|T-`` at both edge endpoints, shape (n_edges, 2, C).

    On boundary edges the jump is the trace itself.
    """
    tr = edge_traces(mesh, dg)
    jump = tr[:, 0] - tr[:, 1]
    return jump.reshape(len(jump), 2, -1)


def edge_jump_sq(mesh, dg):
    """``||[v]||^2_{L2(F)}`` per edge."""
    s, w = EDGE_GAUSS3
    vals = _along_edge(edge_jumps(mesh, dg), s)
    return mesh.edge_lengths * np.einsum("q,eqc->e", w, vals ** 2)


def edge_jump_means(mesh, dg):
    """Edge mean of the jump on interior edges, via the 2-point Gauss rule."""
    x, w = np.polynomial.legendre.leggauss(2)
    vals = _along_edge(edge_jumps(mesh, dg), 0.5 * (x + 1))
    mean = np.einsum("q,eqc->ec", 0.5 * w, vals)
    return mean[mesh.edge_elems[:, 1] >= 0]


# --- boundary data --------------------------------------------------------------

def cr_boundary_values(g, mesh, tags):
    """Edge means of ``g`` on boundary edges carrying one of ``tags``.

    Returns ``(edge_ids, values)`` with ``values`` of shape (n, 2). ``g`` takes
    coordinate arrays ``x, y`` and returns an array of shape ``x.shape + (2,)``;
    ``None`` stands for zero data.
    """
    codes = [TAGS.index(t) if isinstance(t, str) else t for t in tags]
    ids = np.flatnonzero(np.isin(mesh.edge_tags, codes) & (mesh.edge_tags != INTERIOR))
    if g is None:
        return ids, np.zeros((len(ids), 2))
    pts = edge_points(mesh.vertices, mesh.edges[ids])
    vals = np.asarray(g(pts[..., 0], pts[..., 1]), dtype=float)
    vals = np.broadcast_to(vals, pts.shape[:2] + (2,))
    _, w = EDGE_GAUSS3
    return ids, np.einsum("q,eqc->ec", w, vals)


def cr_interpolate(mesh, func):
    """CR interpolant by edge means of ``func`` (3-point Gauss on every edge)."""
    pts = edge_points(mesh.vertices, mesh.edges)
    vals = np.broadcast_to(np.asarray(func(pts[..., 0], pts[..., 1]), float), pts.shape[:2] + (2,))
    _, w = EDGE_GAUSS3
    return np.einsum("q,eqc->ec", w, vals)


# --- P1 matrices ------------------------------------------------------------------

def _scatter(mesh, local):
    """Assemble element matrices of shape (n_elements, 3, 3) on the vertex dofs."""
    el = mesh.elements
    rows = np.repeat(el, 3, axis=1).ravel()
    cols = np.tile(el, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def p1_mass(mesh):
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return _scatter(mesh, mesh.areas[:, None, None] * local)


def p1_stiffness(mesh):
    g = mesh.grad_lambda
    return _scatter(mesh, mesh.areas[:, None, None] * np.einsum("tid,tjd->tij", g, g))


def p1_load(mesh, density, rule=TRI_ORDER4):
    """Dual vector ``psi_i -> int density * psi_i`` from quadrature-point values."""
    bary, w = rule
    local = np.einsum("q,tq,qi->ti", w, density, bary) * mesh.areas[:, None]
    return np.bincount(mesh.elements.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def p1_gradient(mesh, phi):
    return np.einsum("ti,tid->td", phi[mesh.elements], mesh.grad_lambda)


# --- transfer between meshes ------------------------------------------------------

def p1_prolongate(parent_mesh, child_mesh, phi):
    """Exact nodal interpolation of a P1 field onto a refinement of its mesh."""
    lin = child_mesh.lineage
    if lin is None or lin.parent is not parent_mesh:
        raise LineageError("child mesh was not produced by refining parent mesh")
    if len(phi) != parent_mesh.n_vertices:
        raise ValueError("field does not live on the parent mesh")
    out = np.empty(child_mesh.n_vertices)
    n0 = parent_mesh.n_vertices
    out[:n0] = phi
    vp = lin.vertex_parents
    # midpoints are created in order and only reference earlier vertices
    out[n0:] = 0.5 * (out[vp[:, 0]] + out[vp[:, 1]])
    return out


# --- enrichment into the conforming P2 space --------------------------------------

def enrich_cr_to_conforming(v, mesh):
    """Averaging map from homogeneous CR fields into conforming P2.

    Interior vertices receive the mean of the element-local values, interior
    edge midpoints keep the CR value, and every boundary node is set to zero.
    Returns ``(vertex_values, midpoint_values)`` of shapes (n_vertices, 2)
    and (n_edges, 2).
    """
    dg = cr_to_dg(mesh, v)
    sums = np.zeros((mesh.n_vertices, 2))
    np.add.at(sums, mesh.elements.ravel(), dg.reshape(-1, 2))
    vert = sums / mesh.vertex_elements()[:, None]
    bverts = np.unique(mesh.edges[mesh.is_boundary_edge])
    vert[bverts] = 0.0
    mids = np.array(v, dtype=float, copy=True)
    mids[mesh.is_boundary_edge] = 0.0
    return vert, mids


def p2_at(mesh, vertex_values, midpoint_values, rule=TRI_ORDER4):
    """Conforming P2 field at quadrature points, shape (n_elements, n_points, 2)."""
    bary, _ = rule
    phiv = bary * (2 * bary - 1)  # vertex basis
    phie = 4 * bary[:, [1, 2, 0]] * bary[:, [2, 0, 1]]  # edge opposite local i
    vv = vertex_values[mesh.elements]
    ev = midpoint_values[mesh.elem_edges]
    return np.einsum("qi,tic->tqc", phiv, vv) + np.einsum("qi,tic->tqc", phie, ev)


def enrichment_ratio(mesh, v):
    """``||v - E v||^2 / sum_F h_F ||[v]||^2`` for a homogeneous CR field ``v``."""
    vert, mids = enrich_cr_to_conforming(v, mesh)
    diff = cr_at(mesh, v) - p2_at(mesh, vert, mids)
    lhs = integrate(mesh, np.sum(diff ** 2, axis=-1)).sum()
    rhs = np.sum(mesh.edge_lengths * edge_jump_sq(mesh, cr_to_dg(mesh, v)))
    return lhs / rhs


def is_dirichlet_edge(mesh, tags=("inlet", "wall")):
    codes = [TAGS.index(t) for t in tags]
    return np.isin(mesh.edge_tags, codes)
