"""Description of one benchmark problem: geometry, boundary data, parameters, initial guess."""
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .mesh import build_rect_mesh
from .phasefield import OptParams
from .stokes import PhysParams, VelocityBC

INITIAL_KINDS = ("constant", "random", "mask")


@dataclass
class ProblemSpec:
    name: str
    extents: tuple
    nx: int
    ny: int
    boundary_spec: Sequence  # ordered (tag, predicate(x, y)) pairs, first match wins
    inflow: Optional[Callable] = None
    xbreaks: Sequence = ()
    ybreaks: Sequence = ()
    params: PhysParams = field(default_factory=PhysParams)
    opt: OptParams = field(default_factory=OptParams)
    initial: str = "constant"
    initial_value: Optional[float] = None  # defaults to beta
    mask: Optional[Callable] = None  # (x, y) -> bool, fluid where True

    def __post_init__(self):
        if self.initial not in INITIAL_KINDS:
            raise ValueError(f"initial must be one of {INITIAL_KINDS}, got {self.initial!r}")
        if self.initial == "mask" and self.mask is None:
            raise ValueError("initial = mask requires a mask")
        if self.initial_value is not None and not 0 <= self.initial_value <= 1:
            raise ValueError("initial_value must lie in [0, 1]")

    @property
    def area(self):
        (x0, x1), (y0, y1) = self.extents
        return (x1 - x0) * (y1 - y0)

    def initial_mesh(self):
        return build_rect_mesh(self.extents, self.nx, self.ny, self.boundary_spec,
                               xbreaks=self.xbreaks or None, ybreaks=self.ybreaks or None)

    def bc(self):
        return VelocityBC(inflow=self.inflow)

    def initial_phi(self, mesh, seed=0):
        x, y = mesh.vertices.T
        if self.initial == "random":
            return np.random.default_rng(seed).uniform(0.0, 1.0, mesh.n_vertices)
        if self.initial == "mask":
            return np.asarray(self.mask(x, y), dtype=float)
        value = self.opt.beta if self.initial_value is None else self.initial_value
        return np.full(mesh.n_vertices, float(value))
