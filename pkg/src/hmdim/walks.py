"""Step distributions, trajectories and exact convolution powers.

A :class:`StepDistribution` is a finitely supported probability measure on a
group model (:class:`~hmdim.free_group.FreeGroup` or
:class:`~hmdim.matrix_group.SL2Group`). Convolution tables are plain dicts
from hashable group elements to mass; pruned mass is tracked so entropy can
be reported with an error interval.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from hmdim._validation import (
    BudgetExceededError,
    InvalidInputError,
    check_int,
    check_probabilities,
    check_seed,
)
from hmdim.free_group import FreeGroup, ReducedWord, code_to_char, multiply
from hmdim.matrix_group import SL2Group, SL2Matrix
from hmdim.rng import WALK, trajectory_uniforms

PROB_TOL = 1e-12
MASS_TOL = 1e-10
DEFAULT_PRUNE = 1e-15
DEFAULT_BUDGET = 1e-6


class StepDistribution:
    """Probability measure ``mu`` on a group, with atoms in a fixed order.

    The order of atoms is part of the measure's serialization and drives the
    inverse-CDF sampling, so equal serializations give equal trajectories.
    """

    def __init__(self, model, atoms):
        self.model = model
        items = list(atoms.items()) if isinstance(atoms, dict) else list(atoms)
        if not items:
            raise InvalidInputError("step distribution needs a nonempty support")
        elems, probs = [], []
        seen = set()
        for g, p in items:
            g = model.element(g)
            if g in seen:
                raise InvalidInputError(f"duplicate atom {model.format(g)!r}")
            seen.add(g)
            elems.append(g)
            probs.append(p)
        self.probs = check_probabilities(probs, tol=PROB_TOL)
        self.elements = elems
        self.atoms = dict(zip(elems, self.probs.tolist()))
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        self.cdf = cdf

    # -- construction -------------------------------------------------------
    @classmethod
    def uniform(cls, model, elements) -> "StepDistribution":
        elements = list(elements)
        return cls(model, [(g, 1.0 / len(elements)) for g in elements])

    @classmethod
    def simple(cls, model) -> "StepDistribution":
        """Simple random walk: uniform on generators and their inverses."""
        return cls.uniform(model, model.letters)

    @classmethod
    def from_json(cls, data, model=None) -> "StepDistribution":
        if isinstance(data, str):
            data = json.loads(data)
        kind = data.get("model")
        atoms = data.get("atoms")
        if kind not in ("free", "sl2z") or not isinstance(atoms, list):
            raise InvalidInputError("step distribution JSON needs model and atoms")
        if model is None:
            if kind == "free":
                rank = max([ReducedWord.parse(a["g"]).rank_needed for a in atoms] + [2])
                model = FreeGroup(rank)
            else:
                raise InvalidInputError("an sl2z distribution needs its generator model")
        if model.kind != kind:
            raise InvalidInputError(f"measure model {kind!r} does not match {model.kind!r}")
        pairs = []
        for a in atoms:
            if set(a) != {"g", "p"}:
                raise InvalidInputError(f"atom entries take keys g and p, got {sorted(a)}")
            p = a["p"]
            pairs.append((a["g"], float(p) if isinstance(p, str) else p))
        return cls(model, pairs)

    def to_json(self) -> dict:
        return {
            "model": self.model.kind,
            "atoms": [{"g": self.model.format(g), "p": repr(float(p))}
                      for g, p in self.atoms.items()],
        }

    def serialize(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    def __repr__(self):
        return f"StepDistribution({self.model!r}, {len(self.atoms)} atoms)"

    def __eq__(self, other):
        return isinstance(other, StepDistribution) and self.serialize() == other.serialize()

    def __hash__(self):
        return hash(self.serialize())

    # -- derived measures -----------------------------------------------------
    def reflected(self) -> "StepDistribution":
        """``mu_check(g) = mu(g^-1)``."""
        return StepDistribution(self.model, [(self.model.inverse(g), p)
                                             for g, p in self.atoms.items()])

    def perturbed(self, element, delta: float) -> "StepDistribution":
        """Add ``delta`` to one atom and rescale the rest; the support is kept."""
        element = self.model.element(element)
        if element not in self.atoms:
            raise InvalidInputError("can only perturb an atom of the support")
        p0 = self.atoms[element]
        target = p0 + delta
        if not 0 < target < 1:
            raise InvalidInputError(f"perturbed mass {target} outside (0, 1)")
        scale = (1.0 - target) / (1.0 - p0)
        pairs = [(g, target if g == element else p * scale) for g, p in self.atoms.items()]
        total = sum(p for _, p in pairs)
        return StepDistribution(self.model, [(g, p / total) for g, p in pairs])

    # -- summaries -------------------------------------------------------------
    @property
    def support(self) -> list:
        return list(self.elements)

    def shannon_entropy(self) -> float:
        p = self.probs
        return float(-(p * np.log(p)).sum())

    def first_moment(self) -> float:
        """``L(mu) = sum mu(g) d(o, g o)``."""
        return float(sum(p * self.model.length(g) for g, p in self.atoms.items()))

    def identity_mass(self) -> float:
        return self.atoms.get(self.model.identity, 0.0)

    def is_nearest_neighbor(self) -> bool:
        """Support inside generators, their inverses and the identity."""
        letters = set(self.model.letters) | {self.model.identity}
        return all(g in letters for g in self.atoms)

    def letter_codes(self) -> np.ndarray:
        """Atoms as padded letter-code rows (``-1`` pads), free model only."""
        words = [self._as_word(g) for g in self.elements]
        width = max(1, max(len(w) for w in words))
        out = np.full((len(words), width), -1, dtype=np.int8)
        for i, w in enumerate(words):
            for j, ch in enumerate(w):
                out[i, j] = 2 * (ord(ch.lower()) - 97) + ch.isupper()
        return out

    def _as_word(self, g) -> str:
        if self.model.kind == "free":
            return g
        w = self.model.word_of(g)
        if w is None:
            raise InvalidInputError(f"atom {g!r} is not a short word in the generators")
        return w

    def abstract_free(self) -> "StepDistribution":
        """The same abstract measure on the free group over the model's generators."""
        if self.model.kind == "free":
            return self
        free = FreeGroup(self.model.rank)
        return StepDistribution(free, [(self._as_word(g), p) for g, p in self.atoms.items()])


def check_non_elementary(mu: StepDistribution, max_length: int = 6) -> bool:
    """Heuristic ping-pong check: two support elements spanning a free semigroup.

    Looks for non-identity ``g, h`` in the support such that all positive words
    in ``g, h`` of length ``<= max_length`` are pairwise distinct elements.
    """
    model = mu.model
    cands = [g for g in mu.elements if g != model.identity]
    for i, g in enumerate(cands):
        for h in cands[i + 1:]:
            if _free_semigroup(model, g, h, max_length):
                return True
    return False


def _free_semigroup(model, g, h, max_length) -> bool:
    seen = set()
    layer = [model.identity]
    for _ in range(max_length):
        nxt = []
        for w in layer:
            for s in (g, h):
                x = model.multiply(w, s)
                if x in seen or x == model.identity:
                    return False
                seen.add(x)
                nxt.append(x)
        layer = nxt
    return True


# -- trajectories ---------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    positions: list
    seed: int
    index: int = 0
    steps: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.positions) - 1

    @property
    def endpoint(self):
        return self.positions[-1]


def sample_steps(mu: StepDistribution, n: int, seed: int, index: int = 0) -> np.ndarray:
    """Atom indices of the ``n`` increments of trajectory ``index``."""
    u = trajectory_uniforms(seed, index, n, WALK)
    return np.searchsorted(mu.cdf, u, side="right")


def sample_trajectory(mu: StepDistribution, n: int, seed: int, index: int = 0) -> Trajectory:
    """``w_0 = id, w_{m+1} = w_m x_{m+1}`` with i.i.d. increments from ``mu``.

    Trajectory ``index`` of a batch run with the same seed sees exactly the
    same increments.
    """
    n = check_int(n, "n", minimum=0)
    seed = check_seed(seed)
    idx = sample_steps(mu, n, seed, index) if n else np.empty(0, dtype=np.int64)
    model = mu.model
    w = model.identity
    pos = [w]
    elems = mu.elements
    for i in idx:
        w = model.multiply(w, elems[i])
        pos.append(w)
    return Trajectory(positions=pos, seed=seed, index=index, steps=[int(i) for i in idx])


# -- convolution tables --------------------------------------------------------

@dataclass
class ConvolutionTable:
    n: int
    masses: dict
    pruned_mass: float = 0.0
    budget: float = DEFAULT_BUDGET

    def total(self) -> float:
        return float(np.fromiter(self.masses.values(), dtype=float).sum()) + self.pruned_mass

    def __len__(self):
        return len(self.masses)


def identity_table(mu: StepDistribution, budget: float = DEFAULT_BUDGET) -> ConvolutionTable:
    return ConvolutionTable(0, {mu.model.identity: 1.0}, 0.0, budget)


def _free_atoms(mu: StepDistribution):
    if mu.model.kind != "free":
        return None
    out = []
    for g, p in mu.atoms.items():
        if len(g) > 1:
            return None
        inv = g.swapcase() if g else None
        out.append((str(g), inv, p))
    return out


def convolve(t: ConvolutionTable, mu: StepDistribution,
             prune_threshold: float = DEFAULT_PRUNE) -> ConvolutionTable:
    """``t * mu``: one more convolution power, pruning atoms below the threshold."""
    new: dict = {}
    get = new.get
    nn = _free_atoms(mu)
    if nn is not None:
        for w, m in t.masses.items():
            last = w[-1:]
            for s, sinv, p in nn:
                k = w[:-1] if last == sinv else w + s
                new[k] = get(k, 0.0) + m * p
    else:
        mult = mu.model.multiply
        if mu.model.kind == "free":
            mult = _str_multiply
        atoms = list(mu.atoms.items())
        for w, m in t.masses.items():
            for s, p in atoms:
                k = mult(w, s)
                new[k] = get(k, 0.0) + m * p

    pruned = t.pruned_mass
    if prune_threshold > 0:
        small = [k for k, m in new.items() if m < prune_threshold]
        if small:
            pruned += math.fsum(new.pop(k) for k in small)
    if pruned > t.budget:
        raise BudgetExceededError(
            f"pruned mass {pruned:.3e} exceeds budget {t.budget:.1e} at n={t.n + 1}; "
            "lower the prune threshold")
    return ConvolutionTable(t.n + 1, new, pruned, t.budget)


def _str_multiply(u: str, v: str) -> str:
    return str(multiply(u, v))


def convolution_powers(mu: StepDistribution, n_max: int,
                       prune_threshold: float = DEFAULT_PRUNE,
                       budget: float = DEFAULT_BUDGET) -> Iterator[ConvolutionTable]:
    """Yield the tables for ``mu^{*1}, ..., mu^{*n_max}``."""
    t = identity_table(mu, budget)
    for _ in range(n_max):
        t = convolve(t, mu, prune_threshold)
        yield t


def convolution_power(mu: StepDistribution, n: int, prune_threshold: float = DEFAULT_PRUNE,
                      budget: float = DEFAULT_BUDGET) -> ConvolutionTable:
    t = identity_table(mu, budget)
    for t in convolution_powers(mu, n, prune_threshold, budget):
        pass
    return t


@dataclass(frozen=True)
class EntropyInterval:
    value: float
    upper: float


def shannon_entropy_of_table(t: ConvolutionTable, support_size: int | None = None) -> EntropyInterval:
    """``-sum m log m`` over retained atoms, with a bound for the pruned part.

    The pruned mass ``q`` spreads over at most ``|supp mu|^n`` atoms, adding
    at most ``q (n log|supp mu| - log q)`` nats.
    """
    m = np.fromiter(t.masses.values(), dtype=float, count=len(t.masses))
    m = m[m > 0]
    h = float(-(m * np.log(m)).sum())
    q = t.pruned_mass
    if q <= 0:
        return EntropyInterval(h, h)
    s = support_size if support_size is not None else 2
    return EntropyInterval(h, h + q * (t.n * math.log(max(s, 2)) - math.log(q)))


def mean_length_of_table(t: ConvolutionTable, model) -> float:
    """``L(mu^{*n})`` over retained atoms."""
    if model.kind == "free":
        return float(sum(m * len(w) for w, m in t.masses.items()))
    return float(sum(m * model.length(g) for g, m in t.masses.items()))


def pointwise_shannon_sample(t: ConvolutionTable, w) -> float | None:
    """``-(1/n) log mu^{*n}(w)``; ``None`` when ``w`` was pruned or is off-support."""
    m = t.masses.get(w)
    if m is None or m <= 0:
        return None
    return -math.log(m) / t.n if t.n else 0.0


def word_string(codes) -> str:
    return "".join(code_to_char(int(c)) for c in codes)


def element_key(model, g):
    return str(g) if model.kind == "free" else g


__all__ = [
    "StepDistribution", "Trajectory", "ConvolutionTable", "EntropyInterval",
    "sample_trajectory", "sample_steps", "convolve", "convolution_powers",
    "convolution_power", "identity_table", "shannon_entropy_of_table",
    "mean_length_of_table", "pointwise_shannon_sample", "check_non_elementary",
    "SL2Group", "SL2Matrix",
]
