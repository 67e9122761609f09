"""Asymptotic entropy from convolution tables: subadditive and Shannon routes.

Both routes work with entropy increments ``H(mu^{*m}) - H(mu^{*(m-1)})``
rather than with ``H(mu^{*n}) / n``. The increments converge much faster
(the ratio carries an ``O(log n / n)`` bias), and an Aitken step on the
increments at ``m = n - 2s, n - s, n`` (spacing ``s``, default 2) removes most
of what remains. The size of that Aitken correction is folded into the
reported error.
"""

from __future__ import annotations

import math

import numpy as np

from hmdim._kernels import FreeWalkBatch, map_units
from hmdim._validation import (
    InvalidInputError,
    NumericError,
    UnreliableEstimateError,
    check_int,
    check_seed,
)
from hmdim.estimators.base import BaseEstimator, EstimateWithError, check_model
from hmdim.walks import (
    DEFAULT_BUDGET,
    DEFAULT_PRUNE,
    convolution_powers,
    sample_trajectory,
    shannon_entropy_of_table,
)

MAX_PRUNED_FRACTION = 0.05
SPACING = 2
SUBADDITIVE_SLACK = 1e-9


def aitken(a: float, b: float, c: float) -> float:
    """Aitken's delta-squared limit of ``a, b, c``; ``c`` when the step is degenerate."""
    d1, d2 = b - a, c - b
    den = d2 - d1
    if abs(den) < 1e-15:
        return c
    return c - d2 * d2 / den


def build_tables(mu, n_max: int, prune: float = DEFAULT_PRUNE, budget: float = DEFAULT_BUDGET):
    return list(convolution_powers(mu, n_max, prune, budget))


def _entropies(mu, tables):
    k = len(mu.atoms)
    iv = [shannon_entropy_of_table(t, k) for t in tables]
    return np.array([0.0] + [x.value for x in iv]), np.array([0.0] + [x.upper for x in iv])


def check_subadditive(H: np.ndarray, slack: np.ndarray | None = None) -> list[tuple[int, int]]:
    """Pairs ``(n, m)`` with ``H[n+m] > H[n] + H[m]`` beyond the pruning slack."""
    bad = []
    N = len(H) - 1
    for n in range(1, N + 1):
        for m in range(n, N + 1 - n):
            tol = SUBADDITIVE_SLACK + (0.0 if slack is None else slack[n + m])
            if H[n + m] > H[n] + H[m] + tol:
                bad.append((n, m))
    return bad


def entropy_subadditive(model, mu, n_max: int, prune: float = DEFAULT_PRUNE,
                        budget: float = DEFAULT_BUDGET, tables=None,
                        spacing: int = SPACING) -> EstimateWithError:
    """Limit of ``H(mu^{*n}) / n`` from tables up to ``n_max``.

    ``extra`` holds the ratio sequence, the increments and the pruning
    interval width at ``n_max``.
    """
    n_max = check_int(n_max, "n_max", minimum=4)
    spacing = check_int(spacing, "spacing", minimum=1)
    if 2 * spacing >= n_max:
        raise InvalidInputError("n_max too small for the extrapolation spacing")
    check_model(model, mu)
    if tables is None:
        tables = build_tables(mu, n_max, prune, budget)
    tables = tables[:n_max]
    H, Hup = _entropies(mu, tables)
    bad = check_subadditive(H, Hup - H)
    if bad:
        raise NumericError(f"entropy sequence violates subadditivity at {bad[:3]}")
    inc = np.diff(H)
    value = aitken(inc[-1 - 2 * spacing], inc[-1 - spacing], inc[-1])
    prune_width = float(Hup[-1] - H[-1])
    stderr = math.hypot(value - inc[-1], prune_width)
    extra = {
        "ratios": (H[1:] / np.arange(1, n_max + 1)).tolist(),
        "increments": inc.tolist(),
        "last_increment": float(inc[-1]),
        "prune_width": prune_width,
        "n_max": n_max,
    }
    return EstimateWithError(float(value), float(stderr), n_max, "subadditive", extra)


def _free_paths(mu, n: int, M: int, seed: int, threads=None) -> list[list[str]]:
    """``paths[m][i] = w_m`` of trajectory ``i`` for ``m = 0 .. n``."""
    def unit(start, width):
        batch = FreeWalkBatch(mu, seed, start, width)
        out = [[""] * width]
        for _ in range(n):
            batch.advance(1)
            out.append(batch.words())
        return out

    parts = map_units(unit, M, threads)
    return [sum((p[m] for p in parts), []) for m in range(n + 1)]


def _generic_paths(mu, n: int, M: int, seed: int) -> list[list]:
    trajs = [sample_trajectory(mu, n, seed, i).positions for i in range(M)]
    return [[tr[m] for tr in trajs] for m in range(n + 1)]


def entropy_shannon_mc(model, mu, n: int, M: int, prune: float = DEFAULT_PRUNE, seed: int = 0,
                       tables=None, threads=None, budget: float = DEFAULT_BUDGET,
                       spacing: int = SPACING) -> EstimateWithError:
    """``-log mu^{*n}(w_n) / n`` along sampled trajectories, increment-corrected.

    For ``m = n-2s, n-s, n`` each trajectory contributes the increment
    ``-log mu^{*m}(w_m) + log mu^{*(m-1)}(w_{m-1})`` averaged over the last
    step given ``w_{m-1}`` (a conditional expectation that removes most of
    the step noise). The estimate is the Aitken limit of the three mean
    increments; the error combines the delta-method sampling error with the
    size of the Aitken correction. Positions missing from a pruned table are
    charged ``-log prune``; ``extra["raw_mean"]`` is the plain pointwise
    average at the horizon.
    """
    n = check_int(n, "n", minimum=3)
    M = check_int(M, "M", minimum=2)
    spacing = check_int(spacing, "spacing", minimum=1)
    if 2 * spacing >= n:
        raise InvalidInputError("horizon too small for the extrapolation spacing")
    seed = check_seed(seed)
    check_model(model, mu)
    if tables is None:
        tables = build_tables(mu, n, prune, budget)
    if len(tables) < n:
        raise NumericError(f"tables reach n = {len(tables)}, need {n}")
    paths = _free_paths(mu, n, M, seed, threads) if mu.model.kind == "free" else \
        _generic_paths(mu, n, M, seed)

    floor = -math.log(prune) if prune > 0 else math.inf
    mult = mu.model.multiply
    atoms = list(mu.atoms.items())

    def neglog(m, w):
        if m == 0:
            return 0.0, True
        v = tables[m - 1].masses.get(w)
        if v is None or v <= 0:
            return floor, False
        return -math.log(v), True

    missing = 0
    raw = np.empty(M)
    for i, w in enumerate(paths[n]):
        raw[i], ok = neglog(n, w)
        missing += not ok
    pruned_fraction = missing / M
    if pruned_fraction > MAX_PRUNED_FRACTION:
        raise UnreliableEstimateError(
            f"{pruned_fraction:.1%} of endpoints were pruned from the table")

    tail = np.empty((3, M))
    for row, m in enumerate((n - 2 * spacing, n - spacing, n)):
        for i, w in enumerate(paths[m - 1]):
            base = neglog(m - 1, w)[0]
            tail[row, i] = sum(p * neglog(m, mult(w, g))[0] for g, p in atoms) - base

    means = tail.mean(axis=1)
    value = aitken(*means)
    cov = np.atleast_2d(np.cov(tail)) / M
    eps = 1e-7
    grad = np.array([(aitken(*(means + eps * e)) - aitken(*(means - eps * e))) / (2 * eps)
                     for e in np.eye(3)])
    stat = math.sqrt(max(float(grad @ cov @ grad), 0.0))
    stderr = math.hypot(stat, value - means[-1])
    raw /= n
    extra = {
        "horizon": n,
        "raw_mean": float(raw.mean()),
        "raw_stderr": float(raw.std(ddof=1) / math.sqrt(M)),
        "mean_increments": means.tolist(),
        "stat_stderr": stat,
        "pruned_fraction": pruned_fraction,
    }
    return EstimateWithError(float(value), float(stderr), M, "mc", extra)


class EntropyEstimator(BaseEstimator):
    """``method`` is ``"shannon"`` (Monte Carlo) or ``"subadditive"`` (tables only)."""

    def __init__(self, method="shannon", horizon=12, trajectories=10**4,
                 prune=DEFAULT_PRUNE, budget=DEFAULT_BUDGET, seed=0, threads=None):
        self.method = method
        self.horizon = horizon
        self.trajectories = trajectories
        self.prune = prune
        self.budget = budget
        self.seed = seed
        self.threads = threads

    def fit(self, mu, y=None, tables=None):
        if self.method == "shannon":
            est = entropy_shannon_mc(mu.model, mu, self.horizon, self.trajectories, self.prune,
                                     self.seed, tables, self.threads, self.budget)
        elif self.method == "subadditive":
            est = entropy_subadditive(mu.model, mu, self.horizon, self.prune, self.budget, tables)
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.entropy_ = est
        self.value_ = est.value
        return self
