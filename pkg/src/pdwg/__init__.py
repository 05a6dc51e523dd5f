"""Lowest-order Lp primal-dual weak Galerkin solver for 3-D div-curl problems."""
from .analysis import ErrorRecord, RateTable, error_lq, evaluate, export_field
from .assembly import PdwgParams, build_system
from .mesh import Mesh, VoxelDomainSpec, build_mesh
from .problems import example
from .solver import SolveReport, run_pdwg, solve_linear
from .spaces import DofMap, build_dof_map

__version__ = "0.1.0"
