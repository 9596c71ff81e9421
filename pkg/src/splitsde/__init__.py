"""Operator-splitting weak approximation toolkit for Brownian and Levy driven SDEs."""

from . import algebra, flows, jumps, levy, models, montecarlo, schemes
from .exceptions import (
    CapacityError,
    ConfigurationError,
    DomainError,
    InfeasibleError,
    NumericalFailure,
    SamplerFailure,
    SplitSdeError,
)

__all__ = [
    "algebra",
    "flows",
    "jumps",
    "levy",
    "models",
    "montecarlo",
    "schemes",
    "CapacityError",
    "ConfigurationError",
    "DomainError",
    "InfeasibleError",
    "NumericalFailure",
    "SamplerFailure",
    "SplitSdeError",
]

__version__ = "0.1.0"
