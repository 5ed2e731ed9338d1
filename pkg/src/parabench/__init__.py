"""Numerical workbench for interior derivative estimates of a 1-D quasilinear
diffusion equation: solvers, proof decompositions, and inequality checks."""

from .expr import ExprAst, differentiate, evaluate, parse
from .grid import Field, Grid1D, TimeGrid
from .pde import LinearProblem, SolverConfig, solve_linear, solve_quasilinear
from .problem import CoefficientSpec, DataSpec, EstimateWindow, ProblemSpec

__version__ = "0.1.0"

__all__ = [
    "ExprAst",
    "parse",
    "evaluate",
    "differentiate",
    "Grid1D",
    "TimeGrid",
    "Field",
    "SolverConfig",
    "LinearProblem",
    "solve_linear",
    "solve_quasilinear",
    "CoefficientSpec",
    "DataSpec",
    "ProblemSpec",
    "EstimateWindow",
    "__version__",
]
