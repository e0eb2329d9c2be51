"""Multiplicative up-drift processes, their run-time bounds, and EA level analysis."""

from .bounds import BoundReport, LevelModel
from .processes import DomainError, FreshStart, Kind, ProcessSpec, ZeroLaw
from .verify import MonteCarloSummary, Verdict

__version__ = "0.1.0"

__all__ = ["BoundReport", "LevelModel", "DomainError", "FreshStart", "Kind", "ProcessSpec",
           "ZeroLaw", "MonteCarloSummary", "Verdict", "__version__"]
