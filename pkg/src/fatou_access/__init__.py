"""Numerical dynamics of Newton maps: Fatou components, accesses to infinity,
accessible poles and the finite Blaschke products behind invariant accesses."""

from .core import (
    INF,
    EvaluationError,
    InternalInconsistency,
    PreconditionError,
    disc_hyperbolic_distance,
    is_inf,
    sphere_distance,
    to_sphere,
)

__version__ = "0.1.0"

__all__ = [
    "INF",
    "EvaluationError",
    "InternalInconsistency",
    "PreconditionError",
    "disc_hyperbolic_distance",
    "is_inf",
    "sphere_distance",
    "to_sphere",
    "__version__",
]
