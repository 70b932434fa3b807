"""MILP modelling, a desk-scale exact solver, MPS I/O and an external-solver adapter."""

from .bnb import SolveOptions, SolveResult, relative_gap, solve
from .dispatch import SolverSettings
from .model import (BINARY, CONTINUOUS, EQ, GE, INTEGER, LE, MilpModel, ModelBuilder,
                    ModelError, check_solution)

__all__ = [
    "BINARY", "CONTINUOUS", "EQ", "GE", "INTEGER", "LE",
    "MilpModel", "ModelBuilder", "ModelError", "SolveOptions", "SolveResult", "SolverSettings",
    "check_solution", "relative_gap", "solve",
]
