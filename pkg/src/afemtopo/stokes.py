"""Brinkman-Stokes saddle-point problem with CR velocity and P0 pressure."""
import weakref
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fespace as fe
from .mesh import OUTLET, TaggingError
from .quadrature import TRI_ORDER4, tri_points


class SolveError(RuntimeError):
    pass


@dataclass
class PhysParams:
    mu: float = 1.0
    alpha_max: float = 1.0e4
    epsilon: float = 1.0e-2
    gamma: float = 1.0e-2
    body_force: Optional[Callable] = None

    def __post_init__(self):
        for name in ("mu", "epsilon", "gamma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.alpha_max < 0:
            raise ValueError("alpha_max must be non-negative")

    # ``comp`` optionally supplies 1 - phi evaluated separately, so that pure
    # phases give exact zeros at quadrature points
    def alpha(self, phi, comp=None):
        c = 1.0 - phi if comp is None else comp
        return self.alpha_max * c ** 2

    def dalpha(self, phi, comp=None):
        c = 1.0 - phi if comp is None else comp
        return -2.0 * self.alpha_max * c


def double_well(phi, comp=None):
    c = 1.0 - phi if comp is None else comp
    return 0.25 * phi ** 2 * c ** 2


def double_well_prime(phi, comp=None):
    c = 1.0 - phi if comp is None else comp
    return 0.5 * phi * c * (c - phi)


def phase_at(mesh, phi, rule=TRI_ORDER4):
    """``phi`` and ``1 - phi`` at the quadrature points."""
    return fe.p1_at(mesh, phi, rule), fe.p1_at(mesh, 1.0 - np.asarray(phi), rule)


@dataclass
class VelocityBC:
    """Dirichlet data: ``inflow`` on inlet edges, zero on walls, outlets traction free.

    ``inflow`` maps coordinate arrays ``x, y`` to an array of shape
    ``x.shape + (2,)``; ``None`` means homogeneous data.
    """
    inflow: Optional[Callable] = None
    dirichlet_tags: tuple = ("inlet", "wall")

    def g(self, x, y, tag):
        if tag == "inlet" and self.inflow is not None:
            return np.broadcast_to(np.asarray(self.inflow(x, y), float), np.shape(x) + (2,))
        return np.zeros(np.shape(x) + (2,))

    def edge_values(self, mesh):
        """Edge means of g on all Dirichlet edges: ``(edge_ids, values)``."""
        ids, vals = [], []
        for tag in self.dirichlet_tags:
            i, v = fe.cr_boundary_values(self.inflow if tag == "inlet" else None, mesh, [tag])
            ids.append(i)
            vals.append(v)
        ids = np.concatenate(ids)
        order = np.argsort(ids)
        return ids[order], np.vstack(vals)[order]


@dataclass
class SaddleSystem:
    """Velocity block ``A``, divergence block ``B`` (rows: elements) and load ``F``.

    Velocity dofs are ordered component-major: dof ``c * n_edges + e``.
    """
    mesh: object
    A: sp.csr_matrix
    B: sp.csr_matrix
    F: np.ndarray
    fixed_dofs: np.ndarray
    fixed_values: np.ndarray
    gauge: bool


def _cr_stiffness_local(mesh):
    g = mesh.grad_lambda
    return 4.0 * mesh.areas[:, None, None] * np.einsum("tid,tjd->tij", g, g)


def _cr_weighted_mass_local(mesh, weight_q, rule=TRI_ORDER4):
    bary, w = rule
    psi = 1.0 - 2.0 * bary
    return np.einsum("q,tq,qi,qj->tij", w, weight_q, psi, psi) * mesh.areas[:, None, None]


def _scatter_cr(mesh, local):
    """Scalar CR matrix from element matrices (n_elements, 3, 3)."""
    E = mesh.elem_edges
    rows = np.repeat(E, 3, axis=1).ravel()
    cols = np.tile(E, (1, 3)).ravel()
    n = mesh.n_edges
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def cr_stiffness(mesh):
    return _scatter_cr(mesh, _cr_stiffness_local(mesh))


def cr_mass(mesh, weight=None):
    wq = np.ones((mesh.n_elements, len(TRI_ORDER4[1]))) if weight is None else weight
    return _scatter_cr(mesh, _cr_weighted_mass_local(mesh, wq))


def divergence_matrix(mesh):
    """Matrix of ``v -> -(div_T v, q_T)`` for each element indicator ``q_T``."""
    nT, nE = mesh.n_elements, mesh.n_edges
    g = mesh.grad_lambda
    vals = 2.0 * mesh.areas[:, None, None] * g  # (nT, 3 local edges, 2 comps)
    rows = np.repeat(np.arange(nT), 6)
    cols = (mesh.elem_edges[:, :, None] + nE * np.arange(2)[None, None, :]).ravel()
    return sp.csr_matrix((vals.ravel(), (rows, cols)), shape=(nT, 2 * nE))


def load_vector(mesh, body_force):
    if body_force is None:
        return np.zeros(2 * mesh.n_edges)
    bary, w = TRI_ORDER4
    pts = tri_points(mesh.vertices, mesh.elements)
    f = np.broadcast_to(np.asarray(body_force(pts[..., 0], pts[..., 1]), float), pts.shape)
    psi = 1.0 - 2.0 * bary
    local = np.einsum("q,tqc,qi->tic", w, f, psi) * mesh.areas[:, None, None]
    out = np.zeros((2, mesh.n_edges))
    for c in range(2):
        out[c] = np.bincount(mesh.elem_edges.ravel(), weights=local[:, :, c].ravel(), minlength=mesh.n_edges)
    return out.ravel()


def assemble(mesh, phi, params, bc, gauge=None):
    """Assemble the Brinkman-Stokes system for phase field ``phi``.

    ``gauge=None`` enforces a zero-mean pressure exactly when the mesh has
    no outlet edge.
    """
    if np.any(mesh.edge_tags[mesh.is_boundary_edge] < 0):
        raise TaggingError("untagged boundary edge")
    nE = mesh.n_edges
    alpha_q = params.alpha(*phase_at(mesh, phi))
    scalar = params.mu * cr_stiffness(mesh)
    if params.alpha_max > 0:
        scalar = scalar + cr_mass(mesh, alpha_q)
    A = sp.block_diag([scalar, scalar], format="csr")
    B = divergence_matrix(mesh)
    F = load_vector(mesh, params.body_force)
    ids, vals = bc.edge_values(mesh)
    fixed = np.concatenate([ids, ids + nE])
    values = np.concatenate([vals[:, 0], vals[:, 1]])
    if gauge is None:
        gauge = not np.any(mesh.edge_tags == OUTLET)
    return SaddleSystem(mesh, A, B, F, fixed, values, bool(gauge))


def nested_dissection(graph, coords, leaf=128):
    """Fill-reducing ordering of a planar-like graph by recursive coordinate bisection.

    Each node set is split at the coordinate median along its longer extent;
    the nodes of the lower half that touch the upper half form the separator
    and are numbered last.
    """
    graph = sp.csr_matrix(graph, dtype=float, copy=True)
    graph.data[:] = 1.0
    parts = []
    stack = [(np.arange(graph.shape[0]), False)]
    # iterative post-order: (nodes, expanded) entries
    while stack:
        nodes, expanded = stack.pop()
        if expanded or len(nodes) <= leaf:
            parts.append(nodes)
            continue
        c = coords[nodes]
        ax = int(np.argmax(np.ptp(c, axis=0)))
        upper = c[:, ax] > np.median(c[:, ax])
        if upper.all() or not upper.any():
            parts.append(nodes)
            continue
        touch = graph[nodes][:, nodes] @ upper.astype(float) > 0
        sep = ~upper & touch
        # popped in reverse: lower half, upper half, then the separator
        stack.append((nodes[sep], True))
        stack.append((nodes[upper], False))
        stack.append((nodes[~upper & ~sep], False))
    return np.concatenate(parts)


_ORDERINGS = weakref.WeakKeyDictionary()


def _ordering(mesh, free, K):
    key = hash(free.tobytes())
    cache = _ORDERINGS.setdefault(mesh, {})
    if key not in cache:
        xy = np.vstack([np.tile(mesh.edge_midpoints, (2, 1))[free], mesh.centroids])
        cache[key] = nested_dissection(K, xy)
    return cache[key]


def _kkt(system, delta=0.0):
    mesh = system.mesh
    n = 2 * mesh.n_edges
    free = np.setdiff1d(np.arange(n), system.fixed_dofs)
    uc = np.zeros(n)
    uc[system.fixed_dofs] = system.fixed_values
    A, B = system.A, system.B
    Aff = A[free][:, free]
    Bf = B[:, free]
    C = -delta * sp.diags(mesh.areas) if delta else None
    K = sp.bmat([[Aff, Bf.T], [Bf, C]], format="csc")
    rhs = np.concatenate([system.F[free] - A[free] @ uc, -(B @ uc)])
    return K, rhs, free, uc


def _minres(K, rhs, nf, tol=1e-12):
    """MINRES with a block-diagonal preconditioner (exact velocity block, SIMPLE-type Schur diagonal)."""
    Aff = K[:nf, :nf].tocsc()
    Bf = K[nf:, :nf]
    lu = spla.splu(Aff)
    sdiag = np.asarray(Bf.multiply(Bf) @ (1.0 / Aff.diagonal())).ravel()

    def apply(r):
        return np.concatenate([lu.solve(r[:nf]), r[nf:] / sdiag])

    P = spla.LinearOperator(K.shape, matvec=apply)
    x, info = spla.minres(K, rhs, M=P, rtol=tol, maxiter=5000)
    if info != 0:
        raise SolveError(f"MINRES did not converge (info={info})")
    return x


#: pressure regularization of the factorized matrix, relative to element areas
REGULARIZATION = 1e-8


def solve_state(system, method="direct", rtol=1e-13, max_refine=12):
    """Solve the saddle system; returns ``(u, p, residual_norm)``.

    ``u`` has shape (n_edges, 2), ``p`` one value per element, and the
    residual is that of the full saddle system relative to its right-hand side.

    The direct path factorizes the quasi-definite matrix obtained by adding
    ``-REGULARIZATION * |T|`` on the pressure diagonal (symmetric
    nested-dissection ordering, diagonal pivots) and recovers the solution of
    the unregularized system by iterative refinement.
    """
    mesh = system.mesh
    if not system.gauge and not np.any(mesh.edge_tags == OUTLET):
        raise SolveError("pure Dirichlet problem without pressure gauge: the pressure is only defined up to a constant")
    K, rhs, free, uc = _kkt(system)
    nf = len(free)
    rnorm = max(np.linalg.norm(rhs), np.finfo(float).tiny)

    def gauge(x):
        if system.gauge:
            p = x[nf:]
            p -= np.dot(mesh.areas, p) / mesh.area
        return x

    if method == "direct":
        Kd = K - sp.block_diag([sp.csc_matrix((nf, nf)), REGULARIZATION * sp.diags(mesh.areas)], format="csc")
        perm = _ordering(mesh, free, Kd)
        try:
            lu = spla.splu(Kd[perm][:, perm].tocsc(), permc_spec="NATURAL", diag_pivot_thresh=0.0,
                           options=dict(SymmetricMode=True))
        except RuntimeError as exc:
            raise SolveError(f"factorization failed: {exc}") from exc
        x = np.zeros_like(rhs)
        res = np.inf
        for _ in range(max_refine):
            r = rhs - K @ x
            new = np.linalg.norm(r) / rnorm
            if new <= rtol or new >= 0.5 * res:
                res = min(res, new)
                break
            res = new
            d = np.empty_like(x)
            d[perm] = lu.solve(r[perm])
            x = gauge(x + d)
        res = np.linalg.norm(rhs - K @ x) / rnorm
    elif method == "minres":
        x = gauge(_minres(K, rhs, nf))
        res = np.linalg.norm(rhs - K @ x) / rnorm
    else:
        raise ValueError(f"unknown linear solver {method!r}")
    if not np.all(np.isfinite(x)):
        raise SolveError("non-finite solution")
    uvec = uc.copy()
    uvec[free] = x[:nf]
    p = x[nf:]
    u = uvec.reshape(2, mesh.n_edges).T.copy()
    return u, p, float(res)


def solve_brinkman(mesh, phi, params, bc, method="direct"):
    return solve_state(assemble(mesh, phi, params, bc), method=method)


def objective(mesh, phi, u, params):
    """Components of the phase-field objective and their sum under key ``total``."""
    phi_q, comp_q = phase_at(mesh, phi)
    u_q = fe.cr_at(mesh, u)
    speed2 = np.sum(u_q ** 2, axis=-1)
    brinkman = 0.5 * fe.integrate(mesh, params.alpha(phi_q, comp_q) * speed2).sum()
    dissipation = 0.5 * params.mu * fe.cr_energy_norm(mesh, u) ** 2
    body = 0.0
    if params.body_force is not None:
        pts = tri_points(mesh.vertices, mesh.elements)
        f = np.broadcast_to(np.asarray(params.body_force(pts[..., 0], pts[..., 1]), float), pts.shape)
        body = -fe.integrate(mesh, np.sum(f * u_q, axis=-1)).sum()
    grad = fe.p1_gradient(mesh, phi)
    eps = params.epsilon
    gl = 0.5 * eps * np.sum(mesh.areas * np.sum(grad ** 2, axis=1)) + \
        fe.integrate(mesh, double_well(phi_q, comp_q)).sum() / eps
    out = {
        "brinkman": float(brinkman),
        "dissipation": float(dissipation),
        "body": float(body),
        "ginzburg_landau": float(params.gamma * gl),
    }
    out["total"] = sum(out.values())
    return out


def volume_gap(phi, beta, mesh):
    """``int phi dx - beta |Omega|``."""
    return fe.p1_integral(mesh, phi) - beta * mesh.area
