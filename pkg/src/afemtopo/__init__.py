"""Adaptive nonconforming finite elements for phase-field topology optimization of Stokes flow."""
from .adapt import AfemConfig, RunReport, afem_drive, combined_mark, doerfler_mark
from .bench import load_config, preset, write_csv_log, write_vtk
from .estimator import Indicators, eta1, eta2
from .mesh import Mesh, bisect, build_rect_mesh, uniform_refine
from .phasefield import OptParams, OptState, optimize_on_mesh
from .problem import ProblemSpec
from .stokes import PhysParams, VelocityBC, assemble, objective, solve_state, volume_gap

__version__ = "0.1.0"
