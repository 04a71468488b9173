"""Spectral solvers and estimate diagnostics for nonlinear Klein-Gordon and
Dirac equations with data that never vanish, measured in weighted norms."""

from .clifford import DiracAlgebra, construct_algebra, verify_algebra
from .operators import ParamSet, make_params
from .solvers import PicardConfig, SolveReport, dirac_picard_solve, picard_solve
from .spectral import Field, GridSpec

__version__ = "0.1.0"

__all__ = [
    "DiracAlgebra",
    "Field",
    "GridSpec",
    "ParamSet",
    "PicardConfig",
    "SolveReport",
    "construct_algebra",
    "dirac_picard_solve",
    "make_params",
    "picard_solve",
    "verify_algebra",
]
