"""Exceptions and small input checks shared across the package."""

from __future__ import annotations

import math
import numbers

import numpy as np


class HmdimError(Exception):
    """Base class; ``reason`` is a stable machine-readable tag."""

    reason = "error"


class InvalidInputError(HmdimError, ValueError):
    reason = "invalid-input"


class InsufficientDepthError(HmdimError, ValueError):
    reason = "insufficient-depth"


class UnsupportedModelError(HmdimError, ValueError):
    reason = "unsupported-model"


class NumericError(HmdimError, ArithmeticError):
    reason = "numeric"


class BudgetExceededError(HmdimError, RuntimeError):
    reason = "budget-exceeded"


class OracleInconsistentError(HmdimError, RuntimeError):
    reason = "oracle-inconsistent"


class UnreliableEstimateError(HmdimError, RuntimeError):
    reason = "unreliable-estimate"


class InsufficientScalesError(HmdimError, ValueError):
    reason = "insufficient-scales"


class NotFittedError(HmdimError, AttributeError):
    reason = "not-fitted"


def check_int(value, name: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidInputError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise InvalidInputError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_positive(value, name: str, strict: bool = True) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidInputError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(value) or value < 0 or (strict and value == 0):
        kind = "positive" if strict else "nonnegative"
        raise InvalidInputError(f"{name} must be {kind} and finite, got {value}")
    return value


def check_seed(seed) -> int:
    seed = check_int(seed, "seed", minimum=0)
    if seed >= 2**64:
        raise InvalidInputError("seed must fit in 64 bits")
    return seed


def check_probabilities(p, tol: float = 1e-12) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidInputError("probability vector must be 1-d and nonempty")
    if np.any(~np.isfinite(p)) or np.any(p <= 0) or np.any(p > 1):
        raise InvalidInputError("probabilities must lie in (0, 1]")
    if abs(p.sum() - 1.0) > tol:
        raise InvalidInputError(f"probabilities sum to {p.sum()!r}, not 1")
    return p


def check_is_fitted(estimator, attributes) -> None:
    if isinstance(attributes, str):
        attributes = [attributes]
    if not all(hasattr(estimator, a) for a in attributes):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit first")
