"""Traveling waves driven by self-generated chemical gradients.

Model family, closed-form and implicit wave constructions, a finite-volume
solver, front/phase-plane diagnostics, named scenarios and a CLI (``sgg``).
"""
from . import analytic, diagnostics, model, scenarios, solver
from .errors import (
    BreakdownError,
    ConfigError,
    ConstructionError,
    DomainError,
    InsufficientData,
    NoCrossing,
    SGGError,
)
from .state import BoundarySpec, FieldState, Grid1D, SimConfig

__version__ = "0.1.0"

__all__ = [
    "analytic",
    "diagnostics",
    "model",
    "scenarios",
    "solver",
    "BoundarySpec",
    "FieldState",
    "Grid1D",
    "SimConfig",
    "SGGError",
    "DomainError",
    "ConstructionError",
    "ConfigError",
    "NoCrossing",
    "InsufficientData",
    "BreakdownError",
]
