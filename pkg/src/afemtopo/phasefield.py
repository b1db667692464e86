"""Augmented-Lagrangian optimization of the phase field on a fixed mesh.

Each outer loop solves the Brinkman-Stokes state once, performs ``n_inner``
stabilized semi-implicit L2 gradient-flow steps with the velocity frozen,
then updates the volume multiplier and penalty.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse.linalg as spla

from . import fespace as fe
from .stokes import SolveError, assemble, double_well_prime, objective, phase_at, solve_state, volume_gap


class OptimizationError(RuntimeError):
    """Raised when a solve fails mid-run; ``state`` holds the history gathered so far."""

    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


@dataclass
class OptParams:
    beta: float = 0.5
    dt: float = 1.0e-4
    s_tilde: float = 0.25
    n_outer: int = 50
    n_inner: int = 10
    ell0: float = 0.0
    zeta0: float = 100.0
    kappa: float = 1.1
    #: treat the penalty term zeta*W implicitly (rank-one update of the step matrix)
    implicit_volume: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.s_tilde < 0:
            raise ValueError("s_tilde must be non-negative")
        if int(self.n_outer) != self.n_outer or self.n_outer < 1:
            raise ValueError("n_outer must be an integer >= 1")
        if int(self.n_inner) != self.n_inner or self.n_inner < 0:
            raise ValueError("n_inner must be an integer >= 0")
        if not self.zeta0 > 0:
            raise ValueError("zeta0 must be positive")
        if not self.kappa >= 1:
            raise ValueError("kappa must be >= 1")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")


@dataclass
class OptState:
    ell: float
    zeta: float
    zeta0: float
    n_updates: int = 0
    history: list = field(default_factory=list)

    @classmethod
    def initial(cls, opt):
        return cls(ell=float(opt.ell0), zeta=float(opt.zeta0), zeta0=float(opt.zeta0))

    def update(self, W, kappa):
        self.ell += self.zeta * W
        self.n_updates += 1
        # recomputed from the count so that zeta == zeta0 * kappa**m holds exactly
        self.zeta = self.zeta0 * kappa ** self.n_updates

    def reset_penalty(self, zeta0=None):
        if zeta0 is not None:
            self.zeta0 = float(zeta0)
        self.n_updates = 0
        self.zeta = self.zeta0


def lagrangian(mesh, phi, u, params, beta, ell, zeta):
    """Objective components plus ``W``, ``objective`` (J) and ``lagrangian``."""
    comp = objective(mesh, phi, u, params)
    W = volume_gap(phi, beta, mesh)
    out = {k: v for k, v in comp.items() if k != "total"}
    out["objective"] = comp["total"]
    out["W"] = W
    out["lagrangian"] = comp["total"] + ell * W + 0.5 * zeta * W * W
    return out


def sensitivity_density(mesh, phi, u_q, params):
    """``(gamma/eps) f'(phi) + 1/2 alpha'(phi)|u|^2`` at the quadrature points."""
    phi_q, comp_q = phase_at(mesh, phi)
    speed2 = np.sum(u_q ** 2, axis=-1)
    return (params.gamma / params.epsilon * double_well_prime(phi_q, comp_q)
            + 0.5 * params.dalpha(phi_q, comp_q) * speed2)


def sensitivity_source(mesh, phi, u, state, params, opt, include_penalty=True):
    """P1 dual vector of the pointwise derivative of the augmented Lagrangian.

    The ``gamma*eps`` gradient part is excluded since the flow step treats
    it implicitly. ``include_penalty=False`` drops the ``zeta*W`` part.
    """
    dens = sensitivity_density(mesh, phi, fe.cr_at(mesh, u), params)
    shift = state.ell
    if include_penalty:
        shift += state.zeta * volume_gap(phi, opt.beta, mesh)
    return fe.p1_load(mesh, dens + shift)


class FlowOperator:
    """Factorized step matrix ``(1/dt + S/eps) M + gamma*eps*K`` for one mesh."""

    def __init__(self, mesh, params, opt):
        self.mesh = mesh
        self.M = fe.p1_mass(mesh)
        self.K = fe.p1_stiffness(mesh)
        self.shift = 1.0 / opt.dt + opt.s_tilde / params.epsilon
        self.ge = params.gamma * params.epsilon
        A = (self.shift * self.M + self.ge * self.K).tocsc()
        try:
            self.lu = spla.splu(A)
        except RuntimeError as exc:
            raise SolveError(f"phase-field step matrix: {exc}") from exc
        self.mvec = np.asarray(self.M.sum(axis=1)).ravel()  # integrals of the hat functions
        self._Ainv_m = self.lu.solve(self.mvec)

    def step(self, phi, source, zeta=0.0):
        """Increment for ``phi`` given the explicit ``source``.

        With ``zeta > 0`` the matrix gains ``zeta * m m^T`` so that the penalty
        ``zeta*W(phi)`` already in ``source`` is advanced to ``zeta*W(phi+)``.
        """
        rhs = -source - self.ge * (self.K @ phi)
        d = self.lu.solve(rhs)
        if zeta:
            # Sherman-Morrison for the rank-one term zeta * m m^T
            d -= zeta * (self.mvec @ d) / (1.0 + zeta * (self.mvec @ self._Ainv_m)) * self._Ainv_m
        return d


def gradient_flow_step(mesh, phi, source, opt, params, operator=None, zeta=0.0):
    """One semi-implicit step followed by nodal clamping into [0, 1].

    Solves ``(1/dt + S/eps) M (phi+ - phi) + gamma*eps*K phi+ = -source``.
    """
    op = operator if operator is not None else FlowOperator(mesh, params, opt)
    out = phi + op.step(phi, source, zeta)
    if not np.all(np.isfinite(out)):
        raise SolveError("non-finite phase field after gradient-flow step")
    return np.clip(out, 0.0, 1.0)


def inner_functional(mesh, phi, u, params, beta, ell, zeta):
    """``gamma P_eps(phi) + 1/2 (alpha(phi), |u|^2) + ell W + zeta/2 W^2`` at frozen ``u``."""
    comp = objective(mesh, phi, u, params)
    W = volume_gap(phi, beta, mesh)
    return comp["ginzburg_landau"] + comp["brinkman"] + ell * W + 0.5 * zeta * W * W


def inner_steps(mesh, phi, u, state, params, opt, operator=None, n=None):
    op = operator if operator is not None else FlowOperator(mesh, params, opt)
    u_q = fe.cr_at(mesh, u)
    zeta_implicit = state.zeta if opt.implicit_volume else 0.0
    for _ in range(opt.n_inner if n is None else n):
        dens = sensitivity_density(mesh, phi, u_q, params)
        src = fe.p1_load(mesh, dens + state.ell + state.zeta * volume_gap(phi, opt.beta, mesh))
        phi = gradient_flow_step(mesh, phi, src, opt, params, operator=op, zeta=zeta_implicit)
    return phi


def optimize_on_mesh(mesh, phi0, state, params, opt, bc, solver="direct",
                     level=0, callback: Optional[Callable] = None):
    """Run ``opt.n_outer`` outer loops on ``mesh``; returns ``(phi, u, p, state)``.

    One history record is appended per outer loop. Record ``j`` holds the
    augmented Lagrangian of the phase field produced by loop ``j``, with the
    multipliers that loop used, evaluated with its own state solution (taken
    from the next solve, so the run performs ``n_outer + 1`` state solves).
    ``callback(record)`` is called after each record is completed.
    """
    phi = np.clip(np.asarray(phi0, float), 0.0, 1.0)
    if len(phi) != mesh.n_vertices:
        raise ValueError("phase field does not match the mesh")
    op = FlowOperator(mesh, params, opt)
    pending = None

    def solve(phi):
        try:
            return solve_state(assemble(mesh, phi, params, bc), method=solver)
        except SolveError as exc:
            raise OptimizationError(f"state solve failed at level {level}: {exc}", state) from exc

    def close(pending, u, res):
        rec = dict(pending)
        rec.update(lagrangian(mesh, phi, u, params, opt.beta, rec["ell"], rec["zeta"]))
        rec["residual"] = res
        state.history.append(rec)
        if callback is not None:
            callback(rec)

    for j in range(opt.n_outer):
        u, p, res = solve(phi)
        if pending is not None:
            close(pending, u, res)
        pending = dict(level=level, outer=j, ell=state.ell, zeta=state.zeta, n_vertices=mesh.n_vertices)
        try:
            phi = inner_steps(mesh, phi, u, state, params, opt, operator=op)
        except SolveError as exc:
            raise OptimizationError(f"gradient flow failed at level {level}: {exc}", state) from exc
        state.update(volume_gap(phi, opt.beta, mesh), opt.kappa)
    u, p, res = solve(phi)
    close(pending, u, res)
    return phi, u, p, state
