"""Harmonic measures of random walks on hyperbolic groups: exact oracles and estimators."""

from hmdim.free_group import BoundaryWord, FreeGroup, ReducedWord
from hmdim.matrix_group import SANOV, SL2Group, SL2Matrix
from hmdim.walks import StepDistribution

__version__ = "0.1.0"

__all__ = [
    "BoundaryWord", "FreeGroup", "ReducedWord", "SANOV", "SL2Group", "SL2Matrix",
    "StepDistribution",
]
