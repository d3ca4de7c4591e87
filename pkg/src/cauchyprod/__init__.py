"""Eigenvalue statistics of products of Cauchy-Lorentz random matrices."""
from .errors import (
    AccuracyWarning,
    ConvergenceError,
    DomainError,
    NumericError,
    SamplingError,
    UnsupportedError,
)
from .weight import EnsembleConfig, RadialProfile

__all__ = [
    "AccuracyWarning",
    "ConvergenceError",
    "DomainError",
    "EnsembleConfig",
    "NumericError",
    "RadialProfile",
    "SamplingError",
    "UnsupportedError",
]
__version__ = "0.1.0"
