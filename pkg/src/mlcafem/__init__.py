"""Adaptive P1 finite elements for 2D elliptic eigenvalue problems.

The main entry points are :func:`multilevel_correction_solve` (each adaptive
level costs one source solve on the fine mesh plus a small dense eigenproblem
on the coarse space augmented by the corrected vector) and
:func:`direct_afem_solve` (the standard loop with a full sparse eigensolve per
level).
"""

from .exceptions import (
    ConfigurationError,
    GeometryError,
    HierarchyError,
    NonConvergenceError,
    ReductionError,
)
from .mesh import DomainDef, Mesh, bisect, initial_mesh, prolongation, element_geometry
from .problems import ProblemDef, example1, example2, example3, oracle_square, get_problem
from .assembly import assemble_stiffness, assemble_mass, assemble_load, apply_dirichlet
from .linalg import EigenPair, EigenSet, OpCounter, cg_solve, dense_sym_gen_eig, sparse_smallest_eigs
from .estimator import IndicatorField, OscillationField, eigen_indicators, bvp_indicators, oscillation
from .algorithm import (
    AdaptiveConfig,
    LevelRecord,
    dorfler_mark,
    multilevel_correction_solve,
    direct_afem_solve,
    uniform_solve,
    afem_bvp_solve,
    eigenvalue_error_expansion_check,
)

from .report import rate, compare
from .vtk import write_vtk

__version__ = "0.1.0"
