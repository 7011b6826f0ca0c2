from .io import emit_model, parse_lp, parse_mps, parse_solution_text, read_model, to_lp, to_mps
from .model import (
    BINARY_TOL,
    LinConstraint,
    MilpModel,
    ModelError,
    Sense,
    Solution,
    Var,
    VarKind,
    snap_binaries,
)
from .solve import (
    BACKENDS,
    DEFAULT_MIP_GAP,
    SolveConfig,
    SolverError,
    SolverUnavailable,
    solve,
)

__all__ = [
    "BACKENDS",
    "BINARY_TOL",
    "DEFAULT_MIP_GAP",
    "LinConstraint",
    "MilpModel",
    "ModelError",
    "Sense",
    "Solution",
    "SolveConfig",
    "SolverError",
    "SolverUnavailable",
    "Var",
    "VarKind",
    "emit_model",
    "parse_lp",
    "parse_mps",
    "parse_solution_text",
    "read_model",
    "snap_binaries",
    "solve",
    "to_lp",
    "to_mps",
]
