"""The free group F_k with its word metric.

Words are written over ``a, b, c, ...`` with capitals for inverses
(``"abA"`` is ``a b a^-1``). A :class:`ReducedWord` is a ``str`` that is
guaranteed cancellation-free, so it hashes, compares and serializes like the
plain string, and tight loops may work on ``str`` directly.

Letters also have an integer code ``2*i + inverted`` which fixes the
canonical order ``a < A < b < B < ...`` and makes inversion ``code ^ 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from hmdim._validation import InsufficientDepthError, InvalidInputError, check_int
from hmdim.hyperbolic import MetricModel

MAX_RANK = 26


class Letter(NamedTuple):
    generator_index: int
    inverted: bool

    @property
    def code(self) -> int:
        return 2 * self.generator_index + int(self.inverted)

    def inverse(self) -> "Letter":
        return Letter(self.generator_index, not self.inverted)

    def __str__(self):
        ch = chr(ord("a") + self.generator_index)
        return ch.upper() if self.inverted else ch

    @classmethod
    def from_char(cls, ch: str) -> "Letter":
        if len(ch) != 1 or not ch.isascii() or not ch.isalpha():
            raise InvalidInputError(f"not a letter: {ch!r}")
        return cls(ord(ch.lower()) - ord("a"), ch.isupper())

    @classmethod
    def from_code(cls, code: int) -> "Letter":
        return cls(code >> 1, bool(code & 1))


def _inv_char(ch: str) -> str:
    return ch.lower() if ch.isupper() else ch.upper()


def free_reduce(s: str) -> str:
    """Freely reduce an arbitrary string of letters."""
    out: list[str] = []
    for ch in s:
        if out and out[-1] == _inv_char(ch):
            out.pop()
        else:
            out.append(ch)
    return "".join(out)


def char_to_code(ch: str) -> int:
    return 2 * (ord(ch.lower()) - 97) + ch.isupper()


def code_to_char(code: int) -> str:
    ch = chr(97 + (code >> 1))
    return ch.upper() if code & 1 else ch


class ReducedWord(str):
    """An element of F_k as a cancellation-free word; ``""`` is the identity."""

    __slots__ = ()

    def __new__(cls, s: str = ""):
        if isinstance(s, ReducedWord):
            return s
        s = str(s)
        for ch in s:
            if not (ch.isascii() and ch.isalpha()):
                raise InvalidInputError(f"invalid letter {ch!r} in word {s!r}")
        for x, y in zip(s, s[1:]):
            if y == _inv_char(x):
                raise InvalidInputError(f"word {s!r} is not reduced")
        return super().__new__(cls, s)

    @classmethod
    def parse(cls, s: str) -> "ReducedWord":
        """Parse any word, freely reducing it first."""
        for ch in s:
            if not (ch.isascii() and ch.isalpha()):
                raise InvalidInputError(f"invalid letter {ch!r} in word {s!r}")
        return str.__new__(cls, free_reduce(s))

    @property
    def letters(self) -> tuple[Letter, ...]:
        return tuple(Letter.from_char(ch) for ch in self)

    @property
    def rank_needed(self) -> int:
        return max((ord(ch.lower()) - 96 for ch in self), default=0)

    def inverse(self) -> "ReducedWord":
        return str.__new__(ReducedWord, inverse(self))

    def __mul__(self, other):
        if isinstance(other, str):
            return multiply(self, other)
        return NotImplemented

    def __repr__(self):
        return f"ReducedWord({str.__repr__(self)})"


IDENTITY = ReducedWord("")


def inverse(u: str) -> str:
    return "".join(_inv_char(ch) for ch in reversed(u))


def cancellation_length(u: str, v: str) -> int:
    """Number of letters cancelled when forming ``u v``."""
    c = 0
    n = min(len(u), len(v))
    while c < n and v[c] == _inv_char(u[-1 - c]):
        c += 1
    return c


def multiply(u: str, v: str) -> ReducedWord:
    """Reduced form of the concatenation ``u v``."""
    c = cancellation_length(u, v)
    return str.__new__(ReducedWord, u[: len(u) - c] + v[c:])


def common_prefix_length(u: str, v: str) -> int:
    n = min(len(u), len(v))
    i = 0
    while i < n and u[i] == v[i]:
        i += 1
    return i


def word_distance(u: str, v: str) -> int:
    """``d(u, v) = |u^-1 v|``."""
    c = common_prefix_length(u, v)
    return len(u) + len(v) - 2 * c


def word_gromov_product(u: str, v: str) -> int:
    """``(u|v)_e``: on the tree this is the common prefix length."""
    return common_prefix_length(u, v)


def metric_model() -> MetricModel:
    return MetricModel(distance=word_distance, basepoint=IDENTITY, name="free")


@dataclass(frozen=True)
class BoundaryWord:
    """Finite-depth proxy for an infinite reduced word."""

    prefix: ReducedWord

    def __post_init__(self):
        object.__setattr__(self, "prefix", ReducedWord(self.prefix))
        if len(self.prefix) < 1:
            raise InvalidInputError("boundary proxy needs depth >= 1")

    @property
    def depth(self) -> int:
        return len(self.prefix)

    def __str__(self):
        return f"{self.prefix}..."


class BoundaryProduct(NamedTuple):
    value: int
    saturated: bool


def boundary_product(xi: BoundaryWord, eta: BoundaryWord) -> BoundaryProduct:
    """Common prefix length; ``saturated`` when it hits the shallower depth.

    A saturated value is only a lower bound on the true product.
    """
    value = common_prefix_length(xi.prefix, eta.prefix)
    return BoundaryProduct(value, value >= min(xi.depth, eta.depth))


def left_translate_boundary(g: str, xi: BoundaryWord) -> BoundaryWord:
    """Proxy for ``g xi``; loses at most ``|g|`` letters of depth."""
    if xi.depth <= len(g):
        raise InsufficientDepthError(
            f"depth {xi.depth} does not determine the translate by a word of length {len(g)}")
    return BoundaryWord(multiply(g, xi.prefix))


def shadow_threshold(center_length: int, R: float) -> int:
    """Minimal common prefix with ``x`` for membership in ``S(x, R)`` based at ``e``."""
    return max(0, math.ceil(center_length - R - 1e-12))


def uniform_boundary_sample(rng: np.random.Generator, depth: int, rank: int) -> BoundaryWord:
    """Draw from the uniform (maximal-entropy) measure on the boundary of F_k."""
    depth = check_int(depth, "depth", minimum=1)
    codes = uniform_boundary_codes(rng, 1, depth, rank)[0]
    return BoundaryWord(ReducedWord(codes_to_word(codes)))


def uniform_boundary_codes(rng: np.random.Generator, n: int, depth: int, rank: int) -> np.ndarray:
    """``n`` uniform boundary prefixes as an ``(n, depth)`` array of letter codes."""
    rank = check_int(rank, "rank", minimum=2)
    r = 2 * rank
    out = np.empty((n, depth), dtype=np.int8)
    out[:, 0] = rng.integers(0, r, size=n)
    for t in range(1, depth):
        # skip the inverse of the previous letter
        step = rng.integers(0, r - 1, size=n)
        forbidden = out[:, t - 1] ^ 1
        out[:, t] = step + (step >= forbidden)
    return out


def codes_to_word(codes) -> str:
    return "".join(code_to_char(int(c)) for c in codes)


def word_to_codes(word: str) -> np.ndarray:
    return np.array([char_to_code(ch) for ch in word], dtype=np.int8)


def reduced_words(rank: int, length: int) -> Iterator[ReducedWord]:
    """All reduced words of the given length, in canonical letter order."""
    chars = [code_to_char(c) for c in range(2 * rank)]

    def rec(prefix: str):
        if len(prefix) == length:
            yield str.__new__(ReducedWord, prefix)
            return
        for ch in chars:
            if prefix and ch == _inv_char(prefix[-1]):
                continue
            yield from rec(prefix + ch)

    yield from rec("")


def sphere_size(rank: int, length: int) -> int:
    return 1 if length == 0 else 2 * rank * (2 * rank - 1) ** (length - 1)


class FreeGroup:
    """The group F_k as a model for walks: elements are reduced words."""

    kind = "free"

    def __init__(self, rank: int):
        self.rank = check_int(rank, "rank", minimum=1)
        if self.rank > MAX_RANK:
            raise InvalidInputError(f"rank must be <= {MAX_RANK}")

    def __repr__(self):
        return f"FreeGroup({self.rank})"

    @property
    def identity(self) -> ReducedWord:
        return IDENTITY

    @property
    def generators(self) -> list[ReducedWord]:
        return [ReducedWord(code_to_char(2 * i)) for i in range(self.rank)]

    @property
    def letters(self) -> list[ReducedWord]:
        return [ReducedWord(code_to_char(c)) for c in range(2 * self.rank)]

    def element(self, spec) -> ReducedWord:
        w = ReducedWord.parse(spec) if isinstance(spec, str) else None
        if w is None:
            raise InvalidInputError(f"free-group element must be a word string, got {spec!r}")
        if w.rank_needed > self.rank:
            raise InvalidInputError(f"word {spec!r} uses a generator beyond rank {self.rank}")
        return w

    def multiply(self, u, v) -> ReducedWord:
        return multiply(u, v)

    def inverse(self, u) -> ReducedWord:
        return str.__new__(ReducedWord, inverse(u))

    def length(self, u) -> float:
        return float(len(u))

    def format(self, u) -> str:
        return str(u)

    def metric_model(self) -> MetricModel:
        return metric_model()
