"""Result types shared by the estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from hmdim._validation import InvalidInputError

try:
    from sklearn.base import BaseEstimator
except ImportError:  # pragma: no cover
    BaseEstimator = object

METHODS = ("mc", "subadditive", "exact-table")


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    stderr: float
    n_samples: int
    method: str
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.stderr >= 0:
            raise InvalidInputError(f"stderr must be nonnegative, got {self.stderr}")
        if self.n_samples < 1:
            raise InvalidInputError("n_samples must be >= 1")
        if self.method not in METHODS:
            raise InvalidInputError(f"unknown method {self.method!r}")

    def interval(self, z: float = 3.0) -> tuple[float, float]:
        return self.value - z * self.stderr, self.value + z * self.stderr

    def agrees_with(self, other, z: float = 3.0) -> bool:
        """``|a - b| <= z * sqrt(se_a^2 + se_b^2)``.

        ``other`` may be an estimate, a ``(value, stderr)`` pair or a number.
        """
        if isinstance(other, EstimateWithError):
            v, se = other.value, other.stderr
        elif isinstance(other, tuple):
            v, se = float(other[0]), float(other[1])
        else:
            v, se = float(other), 0.0
        return abs(self.value - v) <= z * math.hypot(self.stderr, se) + 1e-12

    def to_json(self) -> dict:
        out = {"value": self.value, "stderr": self.stderr, "n_samples": self.n_samples,
               "method": self.method}
        out.update(self.extra)
        return out


def check_model(model, mu):
    if model is not None and model is not mu.model and repr(model) != repr(mu.model):
        raise InvalidInputError(f"model {model!r} does not match the measure's {mu.model!r}")
    return mu.model
