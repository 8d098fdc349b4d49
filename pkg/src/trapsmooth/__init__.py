"""Numerics for local smoothing and resolvent growth near a degenerate trapped orbit."""

__version__ = "0.1.0"

from .errors import ConfigError, NumericalFailure, ResolutionError
from .fitting import ScalingFit, fit_exponent

__all__ = ["__version__", "ConfigError", "NumericalFailure", "ResolutionError",
           "ScalingFit", "fit_exponent"]
