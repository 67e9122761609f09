"""Vectorized batch walks used by the Monte Carlo estimators.

A batch covers trajectories ``start .. start+width-1`` and draws its
uniforms from :class:`~hmdim.rng.UniformBlocks`, so every trajectory sees
the same increments as :func:`hmdim.walks.sample_trajectory` with the same
index. Work is split into units of ``UNIT`` trajectories (a multiple of the
RNG block) and reduced in index order, which keeps results independent of
the number of worker threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from hmdim._validation import InvalidInputError, check_int
from hmdim.free_group import code_to_char
from hmdim.matrix_group import TWO_PI
from hmdim.rng import BLOCK, WALK, UniformBlocks

UNIT = 16 * BLOCK
CHUNK = 256

_CHARS = bytes(ord(code_to_char(c)) for c in range(52))
_CODE_TABLE = bytes.maketrans(bytes(range(52)), _CHARS)


def resolve_threads(threads=None) -> int:
    if threads is None:
        env = os.environ.get("HMDIM_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise InvalidInputError(f"HMDIM_THREADS must be an integer, got {env!r}") from None
        else:
            threads = 1
    return check_int(threads, "threads", minimum=1)


def map_units(fn, M: int, threads=None, unit: int = UNIT) -> list:
    """``[fn(start, width) for each unit]`` in index order."""
    if unit % BLOCK:
        raise InvalidInputError("unit must be a multiple of the RNG block")
    jobs = [(s, min(unit, M - s)) for s in range(0, M, unit)]
    threads = resolve_threads(threads)
    if threads == 1 or len(jobs) == 1:
        return [fn(s, w) for s, w in jobs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda job: fn(*job), jobs))


def codes_to_strings(stack: np.ndarray, length: np.ndarray) -> list[str]:
    return [stack[i, : length[i]].tobytes().translate(_CODE_TABLE).decode("ascii")
            for i in range(len(length))]


class FreeWalkBatch:
    """Reduced words of a batch of free-group walks, kept as letter stacks."""

    def __init__(self, mu, seed: int, start: int, width: int, cap: int = 64,
                 domain: int = WALK):
        self.atoms = mu.letter_codes()
        self.cdf = mu.cdf
        self.width = width
        self.blocks = UniformBlocks(seed, start, width, domain)
        self.stack = np.zeros((width, max(cap, 8)), dtype=np.int8)
        self.length = np.zeros(width, dtype=np.int64)
        self.rows = np.arange(width)
        self.t = 0

    def _reserve(self, extra: int):
        need = int(self.length.max()) + extra + 1
        cap = self.stack.shape[1]
        if need > cap:
            new_cap = max(need, 2 * cap)
            grown = np.zeros((self.width, new_cap), dtype=np.int8)
            grown[:, :cap] = self.stack
            self.stack = grown

    def _push_letter(self, c: np.ndarray, live: np.ndarray):
        stack, length, rows = self.stack, self.length, self.rows
        top = stack[rows, np.maximum(length - 1, 0)]
        cancel = live & (length > 0) & (top == (c ^ 1))
        push = live & ~cancel
        length[cancel] -= 1
        pr = rows[push]
        stack[pr, length[pr]] = c[push]
        length[pr] += 1

    def advance(self, T: int):
        """Take ``T`` steps, drawing uniforms in slabs of ``CHUNK`` rows."""
        L = self.atoms.shape[1]
        while T > 0:
            k = min(CHUNK, T)
            u = self.blocks.take(k)
            self._reserve(k * L)
            for t in range(k):
                codes = self.atoms[np.searchsorted(self.cdf, u[t], side="right")]
                for j in range(L):
                    c = codes[:, j]
                    self._push_letter(c, c >= 0)
            self.t += k
            T -= k

    def run_until(self, target: int, max_steps: int):
        """Step until each row first reaches word length ``target``.

        Returns ``(done, hit_time)``; rows stop moving once they reach the
        target, and ``hit_time`` is ``-1`` for rows that never did.
        """
        done = self.length >= target
        hit = np.where(done, self.t, -1)
        while not done.all() and self.t < max_steps:
            T = min(CHUNK, max_steps - self.t)
            u = self.blocks.take(T)
            L = self.atoms.shape[1]
            self._reserve(T * L)
            for t in range(T):
                active = ~done
                codes = self.atoms[np.searchsorted(self.cdf, u[t], side="right")]
                for j in range(L):
                    c = codes[:, j]
                    self._push_letter(c, (c >= 0) & active)
                self.t += 1
                newly = active & (self.length >= target)
                if newly.any():
                    done |= newly
                    hit[newly] = self.t
        return done, hit

    def words(self) -> list[str]:
        return codes_to_strings(self.stack, self.length)

    def prefixes(self, depth: int) -> np.ndarray:
        out = self.stack[:, :depth].copy()
        out[self.length < depth] = -1
        return out


def _log_scaled_distance(L2: np.ndarray) -> np.ndarray:
    # d = arccosh(|g|^2 / 2) with log|g|^2 = L2
    out = np.empty_like(L2)
    small = L2 < 30.0
    out[small] = np.arccosh(np.maximum(np.exp(L2[small]) / 2.0, 1.0))
    big = ~small
    out[big] = L2[big] + np.log((1.0 + np.sqrt(1.0 - 4.0 * np.exp(-2.0 * L2[big]))) / 2.0)
    return out


class SL2WalkBatch:
    """Float SL(2) walks kept as four entry arrays with a running log scale.

    Rows are rescaled every ``RESCALE`` steps; entries of the Sanov-type
    generators grow by at most a small factor per step, so that interval
    keeps them well inside the float range.
    """

    RESCALE = 8

    def __init__(self, mu, seed: int, start: int, width: int, domain: int = WALK):
        atoms = np.array([_atom_matrix(g) for g in mu.elements], dtype=float).reshape(-1, 4)
        # trailing identity row used for frozen trajectories
        self.atoms = np.vstack([atoms, [1.0, 0.0, 0.0, 1.0]]).T.copy()
        self.frozen_index = atoms.shape[0]
        self.cdf = mu.cdf
        self.width = width
        self.blocks = UniformBlocks(seed, start, width, domain)
        self.a = np.ones(width)
        self.b = np.zeros(width)
        self.c = np.zeros(width)
        self.d = np.ones(width)
        self.logscale = np.zeros(width)
        self.t = 0

    def _step(self, u_row, active=None):
        idx = np.searchsorted(self.cdf, u_row, side="right")
        if active is not None:
            idx = np.where(active, idx, self.frozen_index)
        e, f, g, h = (row[idx] for row in self.atoms)
        a, b, c, d = self.a, self.b, self.c, self.d
        self.a, self.b, self.c, self.d = a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h
        self.t += 1
        if self.t % self.RESCALE == 0:
            self._rescale()

    def _rescale(self):
        s = np.maximum(np.maximum(np.abs(self.a), np.abs(self.b)),
                       np.maximum(np.abs(self.c), np.abs(self.d)))
        self.a, self.b, self.c, self.d = self.a / s, self.b / s, self.c / s, self.d / s
        self.logscale += np.log(s)

    def advance(self, T: int):
        while T > 0:
            k = min(CHUNK, T)
            u = self.blocks.take(k)
            for t in range(k):
                self._step(u[t])
            T -= k
        self._rescale()

    def log_norm_sq(self) -> np.ndarray:
        f2 = self.a ** 2 + self.b ** 2 + self.c ** 2 + self.d ** 2
        return 2.0 * self.logscale + np.log(f2)

    def distance(self) -> np.ndarray:
        """``d(o, w o)`` in the hyperbolic plane."""
        return _log_scaled_distance(self.log_norm_sq())

    def matrices(self) -> np.ndarray:
        return np.stack([self.a, self.b, self.c, self.d], axis=1).reshape(-1, 2, 2)

    def angles(self) -> np.ndarray:
        a, b, c, d = self.a, self.b, self.c, self.d
        w = ((b + c) + 1j * (a - d)) / ((b - c) + 1j * (a + d))
        return np.mod(np.angle(w), TWO_PI)

    def run_until(self, target: float, max_steps: int):
        # d >= target  <=>  |g|^2 >= 2 cosh(target)
        thr = target + math.log1p(math.exp(-2.0 * target))
        done = self.log_norm_sq() >= thr
        hit = np.where(done, self.t, -1)
        while not done.all() and self.t < max_steps:
            T = min(CHUNK, max_steps - self.t)
            u = self.blocks.take(T)
            for t in range(T):
                active = ~done
                self._step(u[t], active)
                f2 = self.a ** 2 + self.b ** 2 + self.c ** 2 + self.d ** 2
                newly = active & (2.0 * self.logscale + np.log(f2) >= thr)
                if newly.any():
                    done |= newly
                    hit[newly] = self.t
        self._rescale()
        return done, hit


def _atom_matrix(g):
    return [[float(g.a), float(g.b)], [float(g.c), float(g.d)]]


def free_margin(max_return_prob: float, max_len: int = 1, tol: float = 1e-9) -> int:
    """Extra letters beyond the proxy depth that make a prefix final up to ``tol``."""
    if max_return_prob <= 0:
        return max_len
    if max_return_prob >= 1:
        raise InvalidInputError("walk returns with probability one; no boundary limit")
    return max_len * math.ceil(math.log(tol) / math.log(max_return_prob))
