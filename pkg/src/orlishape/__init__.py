"""Discrete Orlicz-Sobolev trace constants and shape optimization on 2-D meshes."""

from . import capacity, cli, mesh, modular, shape_opt, symmetry, trace_solver, young
from .errors import (
    ConfigError,
    DegenerateMultiplierError,
    DivergentIntegralError,
    ExpressionError,
    InfeasibleConstraintError,
    MeshError,
    NormalizationError,
    OrlishapeError,
    YoungFunctionError,
)

__all__ = [
    "young",
    "mesh",
    "modular",
    "trace_solver",
    "shape_opt",
    "capacity",
    "symmetry",
    "cli",
    "OrlishapeError",
    "YoungFunctionError",
    "DivergentIntegralError",
    "ExpressionError",
    "MeshError",
    "NormalizationError",
    "InfeasibleConstraintError",
    "DegenerateMultiplierError",
    "ConfigError",
]

__version__ = "0.1.0"
