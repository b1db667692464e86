"""Dörfler marking and the OPTIMIZE -> ESTIMATE -> MARK -> REFINE driver."""
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import fespace as fe
from .estimator import eta1, eta2
from .mesh import bisect, uniform_refine
from .phasefield import OptState, OptimizationError, optimize_on_mesh

STRATEGIES = ("adaptive", "uniform")


def doerfler_mark(indicator_sq, theta):
    """Greedy minimal Dörfler set, returned as sorted element ids.

    Elements are taken in decreasing order of the squared indicator (ties by
    lower id) until their sum reaches ``theta`` times the total. An all-zero
    input marks element 0.
    """
    eta = np.asarray(indicator_sq, dtype=float)
    if eta.ndim != 1 or len(eta) == 0:
        raise ValueError("indicator must be a non-empty vector")
    if not np.all(np.isfinite(eta)) or np.any(eta < 0):
        raise ValueError("indicator values must be finite and non-negative")
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    total = math.fsum(eta)
    if total == 0:
        return np.array([0])
    order = np.lexsort((np.arange(len(eta)), -eta))
    csum = np.cumsum(eta[order])
    n = min(int(np.searchsorted(csum, theta * csum[-1], side="left")) + 1, len(eta))
    # settle rounding differences with correctly rounded sums
    while n < len(eta) and math.fsum(eta[order[:n]]) < theta * total:
        n += 1
    while n > 1 and eta[order[n - 1]] == 0:
        n -= 1
    while n > 1 and math.fsum(eta[order[:n - 1]]) >= theta * total:
        n -= 1
    return np.sort(order[:n])


@dataclass
class AfemConfig:
    K: int = 4
    theta1: float = 0.4
    theta2: float = 0.6
    strategy: str = "adaptive"
    #: restart the penalty at zeta0 on every new mesh (the multiplier is always carried)
    reset_penalty: bool = True
    solver: str = "direct"
    seed: int = 0
    #: optional stop once both global estimators fall below this value
    eta_tol: Optional[float] = None
    #: per-level optimizer overrides, e.g. ``[{"n_outer": 80}, {}, ...]``
    level_opt: Sequence = ()

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be an integer >= 1")
        for name in ("theta1", "theta2"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.solver not in ("direct", "minres"):
            raise ValueError("solver must be 'direct' or 'minres'")
        if self.eta_tol is not None and not self.eta_tol > 0:
            raise ValueError("eta_tol must be positive")


def combined_mark(ind1, ind2, cfg):
    """Union of the two Dörfler sets."""
    if len(ind1) != len(ind2):
        raise ValueError("indicators live on different meshes")
    return np.union1d(doerfler_mark(ind1.eta_sq, cfg.theta1), doerfler_mark(ind2.eta_sq, cfg.theta2))


def band_fraction(mesh, phi, elements, lo=0.05, hi=0.95):
    """Share of ``elements`` whose vertex values straddle the diffuse interface band."""
    if len(elements) == 0:
        return float("nan")
    vals = phi[mesh.elements[elements]]
    touch = (vals.min(axis=1) < hi) & (vals.max(axis=1) > lo)
    return float(np.mean(touch))


@dataclass
class LevelRecord:
    level: int
    n_vertices: int
    n_elements: int
    eta1: float
    eta2: float
    objective: dict
    W: float
    lagrangian: float
    seconds: float
    n_marked: int = 0
    band_fraction: float = float("nan")


@dataclass
class RunReport:
    strategy: str
    levels: list = field(default_factory=list)
    history: list = field(default_factory=list)
    mesh: object = None
    phi: np.ndarray = None
    u: np.ndarray = None
    p: np.ndarray = None
    eta1: object = None
    eta2: object = None
    error: Optional[str] = None

    @property
    def final(self):
        return self.levels[-1]

    @property
    def final_objective(self):
        """Augmented Lagrangian on the last mesh."""
        return self.history[-1]["lagrangian"]


class AfemError(RuntimeError):
    def __init__(self, msg, report):
        super().__init__(msg)
        self.report = report


def afem_drive(spec, cfg, callback: Optional[Callable] = None, log: Optional[Callable] = None):
    """Run the adaptive (or uniformly refined) optimization for ``cfg.K`` levels."""
    mesh = spec.initial_mesh()
    phi = spec.initial_phi(mesh, cfg.seed)
    bc = spec.bc()
    state = OptState.initial(spec.opt)
    report = RunReport(cfg.strategy, history=state.history)
    t0 = time.perf_counter()

    def stamp(rec):
        rec["seconds"] = time.perf_counter() - t0
        if callback is not None:
            callback(rec)

    for k in range(cfg.K):
        opt = spec.opt
        if k < len(cfg.level_opt) and cfg.level_opt[k]:
            opt = replace(opt, **cfg.level_opt[k])
        if k > 0 and cfg.reset_penalty:
            state.reset_penalty(opt.zeta0)
        try:
            phi, u, p, state = optimize_on_mesh(mesh, phi, state, spec.params, opt, bc,
                                                solver=cfg.solver, level=k, callback=stamp)
        except OptimizationError as exc:
            report.error = str(exc)
            raise AfemError(str(exc), report) from exc
        i1 = eta1(mesh, phi, u, spec.params)
        i2 = eta2(mesh, phi, u, spec.params, bc)
        last = state.history[-1]
        for rec in state.history:
            if rec["level"] == k:
                rec["eta1"], rec["eta2"] = i1.total, i2.total
        rec = LevelRecord(
            level=k, n_vertices=mesh.n_vertices, n_elements=mesh.n_elements,
            eta1=i1.total, eta2=i2.total,
            objective={key: last[key] for key in ("brinkman", "dissipation", "body", "ginzburg_landau", "objective")},
            W=last["W"], lagrangian=last["lagrangian"], seconds=time.perf_counter() - t0,
        )
        report.levels.append(rec)
        report.mesh, report.phi, report.u, report.p, report.eta1, report.eta2 = mesh, phi, u, p, i1, i2
        if log is not None:
            log(f"level {k}: {mesh.n_vertices} vertices, L = {rec.lagrangian:.4f}, W = {rec.W:.2e}, "
                f"eta1 = {rec.eta1:.3e}, eta2 = {rec.eta2:.3e}, {rec.seconds:.1f} s")
        if k == cfg.K - 1:
            break
        if cfg.eta_tol is not None and max(i1.total, i2.total) < cfg.eta_tol:
            break
        if cfg.strategy == "adaptive":
            marked = combined_mark(i1, i2, cfg)
            rec.n_marked = len(marked)
            rec.band_fraction = band_fraction(mesh, phi, marked)
            new = bisect(mesh, marked)
        else:
            new = uniform_refine(mesh)
        phi = fe.p1_prolongate(mesh, new, phi)
        mesh = new
    return report
