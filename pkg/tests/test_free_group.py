import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hmdim._validation import InsufficientDepthError, InvalidInputError
from hmdim.free_group import (
    BoundaryWord,
    FreeGroup,
    ReducedWord,
    boundary_product,
    common_prefix_length,
    free_reduce,
    inverse,
    left_translate_boundary,
    multiply,
    reduced_words,
    sphere_size,
    uniform_boundary_codes,
    word_distance,
    word_gromov_product,
)
from hmdim.rng import stream

letters2 = st.text(alphabet="aAbB", max_size=30)


def naive_reduce(s):
    # repeated scan until no adjacent inverse pair is left
    changed = True
    while changed:
        changed = False
        for i in range(len(s) - 1):
            if s[i] != s[i + 1] and s[i].lower() == s[i + 1].lower():
                s = s[:i] + s[i + 2:]
                changed = True
                break
    return s


def test_multiply_example():
    assert multiply("ab", "Ba") == "aa"


def test_identity_and_inverse():
    assert multiply("", "abAB") == "abAB"
    assert multiply("abAB", inverse("abAB")) == ""
    assert inverse("aB") == "bA"


def test_constructor_rejects_unreduced_parse_reduces():
    with pytest.raises(InvalidInputError):
        ReducedWord("aA")
    assert ReducedWord.parse("abBa") == "aa"


@given(letters2)
def test_reduce_matches_naive(s):
    assert free_reduce(s) == naive_reduce(s)


@given(letters2, letters2, letters2)
def test_associative(u, v, w):
    u, v, w = free_reduce(u), free_reduce(v), free_reduce(w)
    assert multiply(multiply(u, v), w) == multiply(u, multiply(v, w))


@given(letters2, letters2)
def test_gromov_product_is_common_prefix(u, v):
    u, v = free_reduce(u), free_reduce(v)
    assert word_gromov_product(u, v) == common_prefix_length(u, v)
    assert word_distance(u, v) == len(u) + len(v) - 2 * common_prefix_length(u, v)


@pytest.mark.parametrize("k,n", [(2, 0), (2, 1), (2, 3), (3, 2), (3, 4)])
def test_sphere_size(k, n):
    words = list(reduced_words(k, n))
    assert len(words) == sphere_size(k, n)
    assert len(set(words)) == len(words)
    assert sphere_size(k, n) == (1 if n == 0 else 2 * k * (2 * k - 1) ** (n - 1))


def test_uniform_codes_are_reduced_and_uniform():
    codes = uniform_boundary_codes(stream(1, 5, 0), 40000, 6, 2)
    assert not np.any(codes[:, 1:] == (codes[:, :-1] ^ 1))
    freq = np.bincount(codes[:, 0], minlength=4) / len(codes)
    assert np.allclose(freq, 0.25, atol=0.01)
    # successor of a given letter: 3 choices, 1/3 each
    sel = codes[codes[:, 0] == 0, 1]
    assert np.allclose(np.bincount(sel, minlength=4)[[0, 2, 3]] / len(sel), 1 / 3, atol=0.02)


def test_boundary_product_saturation():
    xi, eta = BoundaryWord("abab"), BoundaryWord("abaB")
    assert boundary_product(xi, eta) == (3, False)
    assert boundary_product(xi, BoundaryWord("ab")).saturated


def test_left_translate_needs_depth():
    with pytest.raises(InsufficientDepthError):
        left_translate_boundary("ab", BoundaryWord("ab"))
    assert left_translate_boundary("A", BoundaryWord("abab")).prefix == "bab"


def test_ball_deformation_exact_on_tree():
    # (g xi | g eta) >= (xi | eta) - |g| for 10^4 random triples
    rng = stream(7, 9, 0)
    xs = uniform_boundary_codes(rng, 10**4, 30, 2)
    ys = uniform_boundary_codes(rng, 10**4, 30, 2)
    gs = uniform_boundary_codes(rng, 10**4, 8, 2)
    lens = rng.integers(0, 9, size=10**4)
    chars = np.array(list("aAbB"))
    bad = 0
    for x, y, g, L in zip(xs, ys, gs, lens):
        xw, yw, gw = "".join(chars[x]), "".join(chars[y]), "".join(chars[g[:L]])
        before = common_prefix_length(xw, yw)
        gx, gy = multiply(gw, xw), multiply(gw, yw)
        # the translate loses at most |g| letters of depth; stay inside it
        after = min(common_prefix_length(gx, gy), 30 - L)
        if before < 30 - 2 * L and after < before - L:
            bad += 1
    assert bad == 0


def test_free_group_api():
    F = FreeGroup(3)
    assert [str(g) for g in F.generators] == ["a", "b", "c"]
    assert F.length(F.multiply("ab", "Bc")) == 2
    with pytest.raises(InvalidInputError):
        F.element("d")
    assert math.isclose(F.metric_model().distance(ReducedWord("ab"), ReducedWord("aB")), 2)
