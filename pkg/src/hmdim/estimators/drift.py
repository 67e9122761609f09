"""Monte Carlo drift ``d(o, w_n o) / n``."""

from __future__ import annotations

import math

import numpy as np

from hmdim._kernels import FreeWalkBatch, SL2WalkBatch, map_units
from hmdim._validation import check_int, check_seed
from hmdim.estimators.base import BaseEstimator, EstimateWithError, check_model

MIN_HORIZON = 1000
MIN_TRAJECTORIES = 100


def endpoint_distances(mu, n: int, M: int, seed: int, threads=None) -> np.ndarray:
    """``d(o, w_n o)`` for trajectories ``0 .. M-1``."""
    def unit(start, width):
        if mu.model.kind == "free":
            batch = FreeWalkBatch(mu, seed, start, width)
            batch.advance(n)
            return batch.length.astype(float)
        batch = SL2WalkBatch(mu, seed, start, width)
        batch.advance(n)
        return batch.distance()

    return np.concatenate(map_units(unit, M, threads))


def drift_mc(model, mu, n: int, M: int, seed: int, threads=None,
             strict: bool = True) -> EstimateWithError:
    """Mean and CLT standard error of ``d(o, w_n o) / n`` over ``M`` walks."""
    n = check_int(n, "n", minimum=MIN_HORIZON if strict else 1)
    M = check_int(M, "M", minimum=MIN_TRAJECTORIES if strict else 2)
    seed = check_seed(seed)
    check_model(model, mu)
    x = endpoint_distances(mu, n, M, seed, threads) / n
    se = float(x.std(ddof=1) / math.sqrt(M))
    return EstimateWithError(float(x.mean()), se, M, "mc", {"horizon": n})


class DriftEstimator(BaseEstimator):
    """``fit(mu)`` sets ``drift_`` (an :class:`EstimateWithError`) and ``value_``."""

    def __init__(self, horizon=10**4, trajectories=10**3, seed=0, threads=None):
        self.horizon = horizon
        self.trajectories = trajectories
        self.seed = seed
        self.threads = threads

    def fit(self, mu, y=None):
        self.drift_ = drift_mc(mu.model, mu, self.horizon, self.trajectories, self.seed,
                               self.threads)
        self.value_ = self.drift_.value
        return self
