"""Mathematical programming engine: LP, mixed binary, PWL, Frank-Wolfe."""

from .branch_bound import solve_mbp
from .frank_wolfe import FrankWolfeResult, frank_wolfe
from .program import (
    INF,
    LinearProgram,
    MixedBinaryProgram,
    ProgramBuilder,
    QuadTerm,
    Relation,
    SolveResult,
    Status,
    lp_text,
)
from .pwl import PwlFunction, encode_pwl_convex, encode_pwl_incremental
from .simplex import SimplexSolver, solve_lp

__all__ = [
    "INF",
    "LinearProgram",
    "MixedBinaryProgram",
    "ProgramBuilder",
    "QuadTerm",
    "Relation",
    "SolveResult",
    "Status",
    "lp_text",
    "SimplexSolver",
    "solve_lp",
    "solve_mbp",
    "PwlFunction",
    "encode_pwl_convex",
    "encode_pwl_incremental",
    "FrankWolfeResult",
    "frank_wolfe",
]
