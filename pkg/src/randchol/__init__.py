"""Randomized Cholesky preconditioners for SDD linear systems.

Builds approximate Cholesky factors of graph Laplacians by clique sampling,
extends them to SDDM and general SDD matrices, and solves with
preconditioned conjugate gradient. Includes fill-reducing orderings and a
task-tree parallel factorization.
"""

__version__ = "0.1.0"

from .archive import load_factor, save_factor
from .classify import (
    classify,
    double_sdd,
    extend_sddm,
    sign_flip_reduction,
    split_parts,
)
from .exceptions import (
    ClassificationError,
    ConfigError,
    DimensionMismatchError,
    FactorizationError,
    IndefinitePreconditionerError,
    MatrixFormatError,
    OrderingError,
    RandcholError,
    ZeroPivotError,
)
from .factor import CholFactor, ElimGraph, rchol_laplacian, rchol_sddm, schur_edge_count
from .io import read_matrix_market, write_matrix_market
from .krylov import apply_factor, pcg, solve, solve_laplacian, solve_sdd, solve_sddm
from .models import (
    BenchRow,
    FactorMeta,
    GridSpec,
    MatrixClass,
    MatrixKind,
    OrderingKind,
    OrderingSpec,
    Scenario,
    SolverOptions,
    SolveReport,
    SolveStats,
)
from .ordering import NDTree, bisect, build_nd_tree, mindeg_order, tree_to_perm
from .parallel import par_rchol, separate_edges, task_schedule
from .problems import contrast_field, poisson7, poisson_var
from .sampling import EdgeList, Star, exact_clique, sample_clique
from .sparse import (
    LowerTri,
    Perm,
    SparseSym,
    connected_components,
    from_coo,
    matvec,
    permute_sym,
    solve_lower,
    solve_upper,
)

__all__ = [
    "RandcholError",
    "DimensionMismatchError",
    "MatrixFormatError",
    "ZeroPivotError",
    "ClassificationError",
    "FactorizationError",
    "OrderingError",
    "IndefinitePreconditionerError",
    "ConfigError",
    "SparseSym",
    "LowerTri",
    "Perm",
    "from_coo",
    "matvec",
    "permute_sym",
    "solve_lower",
    "solve_upper",
    "connected_components",
    "MatrixKind",
    "Scenario",
    "MatrixClass",
    "classify",
    "extend_sddm",
    "split_parts",
    "double_sdd",
    "sign_flip_reduction",
    "Star",
    "EdgeList",
    "sample_clique",
    "exact_clique",
    "ElimGraph",
    "CholFactor",
    "rchol_laplacian",
    "rchol_sddm",
    "schur_edge_count",
    "OrderingKind",
    "OrderingSpec",
    "NDTree",
    "mindeg_order",
    "bisect",
    "build_nd_tree",
    "tree_to_perm",
    "separate_edges",
    "par_rchol",
    "task_schedule",
    "SolverOptions",
    "SolveStats",
    "SolveReport",
    "FactorMeta",
    "BenchRow",
    "pcg",
    "apply_factor",
    "solve",
    "solve_laplacian",
    "solve_sddm",
    "solve_sdd",
    "GridSpec",
    "poisson7",
    "contrast_field",
    "poisson_var",
    "read_matrix_market",
    "write_matrix_market",
    "save_factor",
    "load_factor",
]
