"""Empirical harmonic measure: i.i.d. boundary proxies of walk limits."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from hmdim._kernels import FreeWalkBatch, SL2WalkBatch, free_margin, map_units
from hmdim._validation import InvalidInputError, check_int, check_positive, check_seed
from hmdim.estimators.base import BaseEstimator, check_model
from hmdim.free_group import BoundaryWord, ReducedWord, codes_to_word, uniform_boundary_codes
from hmdim.matrix_group import D_MIN, CircleSample
from hmdim.rng import BLOCK, RESAMPLE

MIN_FREE_DEPTH = 40
STEP_FACTOR = 10
RESAMPLE_WARN = 0.01
MAX_RESAMPLES = 20


@dataclass
class BoundaryCloud:
    """``M`` boundary proxies with the walk data that produced them.

    Free clouds keep an ``(M, depth)`` array of letter codes; circle clouds
    keep angles in ``[0, 2 pi)`` and the hyperbolic depth of each source point.
    """

    kind: str
    seed: int
    codes: np.ndarray | None = None
    angles: np.ndarray | None = None
    depths: np.ndarray | None = None
    steps: np.ndarray | None = None
    resampled: int = 0
    rank: int = 0
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.codes) if self.kind == "free" else len(self.angles)

    @property
    def depth(self):
        return self.codes.shape[1] if self.kind == "free" else float(self.depths.min())

    @property
    def resample_rate(self) -> float:
        return self.resampled / max(len(self), 1)

    @property
    def samples(self) -> list:
        if self.kind == "free":
            return [BoundaryWord(ReducedWord(codes_to_word(row))) for row in self.codes]
        return [CircleSample(float(a), float(d)) for a, d in zip(self.angles, self.depths)]

    def subset(self, idx) -> "BoundaryCloud":
        idx = np.asarray(idx)
        return BoundaryCloud(
            self.kind, self.seed,
            None if self.codes is None else self.codes[idx],
            None if self.angles is None else self.angles[idx],
            None if self.depths is None else self.depths[idx],
            None if self.steps is None else self.steps[idx],
            0, self.rank, dict(self.info))

    @classmethod
    def from_codes(cls, codes, rank: int, seed: int = 0) -> "BoundaryCloud":
        codes = np.asarray(codes, dtype=np.int8)
        return cls("free", seed, codes=codes, depths=np.full(len(codes), codes.shape[1]),
                   rank=rank)

    @classmethod
    def from_angles(cls, angles, depth: float = math.inf, seed: int = 0) -> "BoundaryCloud":
        angles = np.mod(np.asarray(angles, dtype=float), 2 * math.pi)
        return cls("circle", seed, angles=angles, depths=np.full(len(angles), depth))


def uniform_free_cloud(rank: int, depth: int, M: int, seed: int) -> BoundaryCloud:
    """Cloud from the uniform (maximal-entropy) boundary measure of F_k."""
    from hmdim.rng import stream

    codes = uniform_boundary_codes(stream(seed, RESAMPLE + 1, 0), M, depth, rank)
    return BoundaryCloud.from_codes(codes, rank, seed)


def _drift_hint(mu, seed: int) -> float:
    if mu.model.kind == "free" and mu.is_nearest_neighbor():
        from hmdim.oracle import exact_length_increments

        return float(exact_length_increments(mu)[-1])
    from hmdim.estimators.drift import endpoint_distances

    n = 500
    return float(endpoint_distances(mu, n, BLOCK, seed).mean() / n)


def _free_margin(mu) -> int:
    if mu.is_nearest_neighbor():
        from hmdim.oracle import solve_first_passage, solve_stationary_markov

        q = solve_first_passage(mu)
        try:
            live = solve_stationary_markov(mu, q).initial > 0
        except InvalidInputError:
            live = q.q > 0
        back = q.q[np.flatnonzero(live) ^ 1]
        return free_margin(float(back.max()) if back.size else 0.0)
    L = mu.letter_codes().shape[1]
    return free_margin(0.5, L)


def sample_boundary_cloud(model, mu, depth, M: int, seed: int, threads=None,
                          margin: int | None = None, drift: float | None = None,
                          min_depth: float | None = None) -> BoundaryCloud:
    """``M`` i.i.d. proxies of the limit point of the walk.

    Free model: each walk runs until its word length first reaches
    ``depth + margin``; the first ``depth`` letters are then final except with
    probability below 1e-9, since undoing them needs ``margin`` consecutive
    returns. SL(2) model: the walk runs until ``d(o, w o) >= depth`` and the
    proxy is the radial projection of ``w o`` to the circle.

    Walks that miss the target within ``10 (depth + margin) / l`` steps are
    redrawn from a fresh sub-stream and counted in ``resampled``.
    """
    M = check_int(M, "M", minimum=1)
    seed = check_seed(seed)
    check_model(model, mu)
    l = drift if drift is not None else _drift_hint(mu, seed)
    if not l > 0:
        raise InvalidInputError("walk has no positive drift; its limit does not exist")
    if mu.model.kind == "free":
        depth = check_int(depth, "depth",
                          minimum=MIN_FREE_DEPTH if min_depth is None else int(min_depth))
        if margin is None:
            margin = _free_margin(mu)
        target = depth + margin
    else:
        depth = check_positive(depth, "depth")
        if depth < (D_MIN if min_depth is None else min_depth):
            raise InvalidInputError(f"hyperbolic depth must be >= {D_MIN}")
        target = depth
        margin = 0
    max_steps = max(1, math.ceil(STEP_FACTOR * target / l))

    def unit(start, width):
        if mu.model.kind == "free":
            batch = FreeWalkBatch(mu, seed, start, width, cap=target + 8)
            done, hit = batch.run_until(target, max_steps)
            return batch.prefixes(depth), None, hit, done
        batch = SL2WalkBatch(mu, seed, start, width)
        done, hit = batch.run_until(target, max_steps)
        return batch.angles(), batch.distance(), hit, done

    parts = map_units(unit, M, threads)
    first = np.concatenate([p[0] for p in parts])
    dist = np.concatenate([p[1] for p in parts]) if mu.model.kind != "free" else None
    hit = np.concatenate([p[2] for p in parts])
    done = np.concatenate([p[3] for p in parts])

    resampled = 0
    for i in np.flatnonzero(~done):
        for attempt in range(1, MAX_RESAMPLES + 1):
            resampled += 1
            key = (attempt << 40) | int(i)
            if mu.model.kind == "free":
                b = FreeWalkBatch(mu, seed, BLOCK * key, 1, cap=target + 8, domain=RESAMPLE)
                ok, h = b.run_until(target, max_steps)
                if ok[0]:
                    first[i] = b.prefixes(depth)[0]
            else:
                b = SL2WalkBatch(mu, seed, BLOCK * key, 1, domain=RESAMPLE)
                ok, h = b.run_until(target, max_steps)
                if ok[0]:
                    first[i], dist[i] = b.angles()[0], b.distance()[0]
            if ok[0]:
                hit[i] = h[0]
                break
        else:
            raise InvalidInputError(f"trajectory {i} missed depth {target} in every resample")

    info = {"target": target, "margin": margin, "max_steps": max_steps, "drift": l}
    if resampled / M > RESAMPLE_WARN:
        info["warning"] = f"resample rate {resampled / M:.2%} exceeds {RESAMPLE_WARN:.0%}"
        warnings.warn(info["warning"], RuntimeWarning, stacklevel=2)
    if mu.model.kind == "free":
        return BoundaryCloud("free", seed, codes=first, depths=np.full(M, depth), steps=hit,
                             resampled=resampled, rank=mu.model.rank, info=info)
    return BoundaryCloud("circle", seed, angles=first, depths=dist, steps=hit,
                         resampled=resampled, info=info)


class BoundarySampler(BaseEstimator):
    """``fit(mu)`` draws ``cloud_``; ``transform`` returns its proxies as an array."""

    def __init__(self, depth=MIN_FREE_DEPTH, n_samples=10**5, seed=0, threads=None):
        self.depth = depth
        self.n_samples = n_samples
        self.seed = seed
        self.threads = threads

    def fit(self, mu, y=None):
        self.cloud_ = sample_boundary_cloud(mu.model, mu, self.depth, self.n_samples,
                                            self.seed, self.threads)
        return self

    def transform(self, X=None):
        cloud = self.cloud_
        return cloud.codes if cloud.kind == "free" else cloud.angles[:, None]
