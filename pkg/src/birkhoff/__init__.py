"""Birkhoff normal forms near elliptic fixed points.

Computer-algebra construction of normal forms, Hilbert-brick perturbation
sampling, genericity diagnostics (triangular invariant map, unit Jacobian,
rescaling), and symplectic stability experiments.
"""

__version__ = "0.1.0"

from .errors import (
    BirkhoffError,
    ConfigError,
    DegenerateFrequencyError,
    DimensionMismatchError,
    DomainError,
    NotEllipticError,
    ShapeError,
    SmallDivisorError,
    StepFailureError,
)
from .polyalg import (
    ActionPolynomial,
    Frequency,
    GradedPolynomial,
    LinearSymplecticMap,
    bombieri_norm,
    diagonalize_quadratic,
    formal_actions,
    poisson_bracket,
    sup_norm_bound,
)
