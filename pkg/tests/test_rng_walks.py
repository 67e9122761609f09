import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hmdim._kernels import FreeWalkBatch, map_units, resolve_threads
from hmdim._validation import BudgetExceededError, InvalidInputError
from hmdim.free_group import FreeGroup, multiply
from hmdim.oracle import exact_mean_lengths
from hmdim.rng import BLOCK, UniformBlocks, stream, trajectory_uniforms
from hmdim.walks import (
    StepDistribution,
    check_non_elementary,
    convolution_power,
    convolution_powers,
    mean_length_of_table,
    sample_trajectory,
    shannon_entropy_of_table,
)


def test_stream_is_keyed():
    a = stream(1, 0, 5).random(4)
    assert np.array_equal(a, stream(1, 0, 5).random(4))
    assert not np.array_equal(a, stream(1, 0, 6).random(4))
    assert not np.array_equal(a, stream(2, 0, 5).random(4))
    assert not np.array_equal(a, stream(1, 1, 5).random(4))


def test_blocks_independent_of_slab_cut():
    full = UniformBlocks(3, 0, 600).take(40)
    b = UniformBlocks(3, 0, 600)
    cut = np.vstack([b.take(7), b.take(30), b.take(3)])
    assert np.array_equal(full, cut)
    # a window starting at a later block sees the same columns
    part = UniformBlocks(3, BLOCK, 300).take(40)
    assert np.array_equal(part, full[:, BLOCK:BLOCK + 300])
    assert np.array_equal(trajectory_uniforms(3, 300, 40), full[:, 300])
    with pytest.raises(ValueError):
        UniformBlocks(3, 5, 10)


def test_map_units_ordered(monkeypatch):
    chunks = map_units(lambda s, w: np.arange(s, s + w), 10000, threads=4)
    assert np.array_equal(np.concatenate(chunks), np.arange(10000))
    monkeypatch.setenv("HMDIM_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2


def test_square_of_srw(F2, srw):
    t = convolution_power(srw, 2)
    assert math.isclose(t.masses[""], 0.25)
    others = {w: p for w, p in t.masses.items() if w}
    assert len(others) == 12
    assert all(math.isclose(p, 1 / 16) for p in others.values())
    H = shannon_entropy_of_table(t, 4).value
    assert math.isclose(H, 2.426015, abs_tol=1e-6)
    assert math.isclose(H, 0.25 * math.log(4) + 0.75 * math.log(16), rel_tol=1e-14)


def test_convolution_matches_brute_force(biased):
    n = 4
    brute = {}
    atoms = list(biased.atoms.items())

    def rec(w, p, k):
        if k == 0:
            brute[w] = brute.get(w, 0.0) + p
            return
        for g, q in atoms:
            rec(str(multiply(w, g)), p * q, k - 1)

    rec("", 1.0, n)
    t = convolution_power(biased, n, prune_threshold=0.0)
    assert set(t.masses) == set(brute)
    for w, p in brute.items():
        assert math.isclose(t.masses[w], p, rel_tol=1e-12)
    assert math.isclose(t.total(), 1.0, rel_tol=1e-12)


def test_pruning_budget(srw):
    with pytest.raises(BudgetExceededError):
        convolution_power(srw, 6, prune_threshold=1e-2, budget=1e-6)
    t = convolution_power(srw, 6, prune_threshold=1e-3, budget=1.0)
    assert t.pruned_mass > 0
    iv = shannon_entropy_of_table(t, 4)
    assert iv.upper > iv.value


def test_mean_length_tables_match_exact(biased, srw):
    for mu in (srw, biased):
        L = exact_mean_lengths(mu, 10)
        tabs = list(convolution_powers(mu, 10, 0.0))
        for n, t in enumerate(tabs, start=1):
            assert math.isclose(mean_length_of_table(t, mu.model), L[n], rel_tol=1e-12)


def test_lazy_walk_table(F2):
    lazy = StepDistribution(F2, {"": 0.5, "a": 0.125, "A": 0.125, "b": 0.125, "B": 0.125})
    t = convolution_power(lazy, 3, 0.0)
    assert math.isclose(t.total(), 1.0)
    L = exact_mean_lengths(lazy, 3)
    assert math.isclose(mean_length_of_table(t, F2), L[3], rel_tol=1e-12)


def test_batch_equals_single_trajectory(biased):
    n, width = 200, 300
    batch = FreeWalkBatch(biased, 9, 0, width)
    batch.advance(n)
    words = batch.words()
    for i in (0, 1, 255, 256, 299):
        assert words[i] == sample_trajectory(biased, n, 9, i).endpoint


def test_batch_equals_single_trajectory_longer_atoms(F2):
    mu = StepDistribution(F2, {"ab": 0.3, "BA": 0.3, "a": 0.2, "A": 0.2})
    batch = FreeWalkBatch(mu, 2, 0, 50)
    batch.advance(60)
    words = batch.words()
    for i in range(0, 50, 9):
        assert words[i] == sample_trajectory(mu, 60, 2, i).endpoint


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.05, 1.0), min_size=4, max_size=4))
def test_step_distribution_roundtrip(w):
    F2 = FreeGroup(2)
    p = np.array(w) / sum(w)
    mu = StepDistribution(F2, dict(zip("aAbB", p)))
    assert math.isclose(sum(mu.probs), 1.0, rel_tol=1e-12)
    assert StepDistribution.from_json(mu.serialize()) == mu
    assert mu.cdf[-1] == 1.0
    refl = mu.reflected()
    assert math.isclose(refl.atoms["A"], mu.atoms["a"])


def test_step_distribution_validation(F2):
    with pytest.raises(InvalidInputError):
        StepDistribution(F2, {"a": 0.5, "b": 0.4})
    with pytest.raises(InvalidInputError):
        StepDistribution(F2, {"a": 1.2, "b": -0.2})
    with pytest.raises(InvalidInputError):
        StepDistribution.from_json({"model": "free", "atoms": [{"g": "a", "q": 1}]})


def test_perturbed_keeps_support(srw):
    m = srw.perturbed("a", 0.1)
    assert set(m.atoms) == set(srw.atoms)
    assert math.isclose(sum(m.probs), 1.0)
    assert m.atoms["a"] > srw.atoms["a"]
    with pytest.raises(InvalidInputError):
        srw.perturbed("ab", 0.1)


def test_non_elementary(F2, srw):
    assert check_non_elementary(srw)
    cyclic = StepDistribution(F2, {"a": 0.5, "A": 0.5})
    assert not check_non_elementary(cyclic)


def test_summaries(srw):
    assert math.isclose(srw.shannon_entropy(), math.log(4))
    assert srw.first_moment() == 1.0
    assert srw.identity_mass() == 0.0
