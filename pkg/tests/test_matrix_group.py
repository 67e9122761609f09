import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hmdim._kernels import SL2WalkBatch
from hmdim._validation import InsufficientDepthError, InvalidInputError
from hmdim.matrix_group import (
    SANOV,
    SL2Group,
    SL2Matrix,
    boundary_interior_product,
    boundary_proxy,
    circle_visual_quasimetric,
    displacement,
    first_relation,
    hyp_distance,
    matrix_boundary_angle,
    moebius_apply,
    to_disk,
)
from hmdim.walks import StepDistribution, sample_trajectory

A, B = SANOV


def test_distance_examples():
    assert math.isclose(hyp_distance(1j, 2j), math.log(2), rel_tol=1e-14)
    assert math.isclose(hyp_distance(1j, 2 + 1j), math.acosh(3), rel_tol=1e-14)


def test_product_example():
    assert A @ B == SL2Matrix(5, 2, 2, 1)


def test_sanov_free_to_length_12():
    assert first_relation(list(SANOV), 12) is None


def test_relation_found_for_torsion():
    # S = [[0,-1],[1,0]] has order 4
    assert first_relation([SL2Matrix(0, -1, 1, 0)], 6) == "aaaa"


def test_determinant_enforced():
    with pytest.raises(InvalidInputError):
        SL2Matrix(1, 1, 1, 1)
    with pytest.raises(InvalidInputError):
        SL2Matrix.from_json([[1.5, 0], [0, 1]])
    assert SL2Matrix.from_json([["1", "2"], ["0", "1"]]) == A


@given(st.lists(st.integers(0, 3), min_size=1, max_size=12))
def test_displacement_matches_moebius(codes):
    G = SL2Group(list(SANOV))
    g = SL2Matrix.identity()
    for c in codes:
        g = g @ G.letters[c]
    z = moebius_apply(g, 1j)
    assert math.isclose(displacement(g), hyp_distance(1j, z), rel_tol=1e-9, abs_tol=1e-9)
    if displacement(g) > 1:
        ang = matrix_boundary_angle(*(float(v) for v in g))
        assert math.isclose(math.cos(ang), (to_disk(z) / abs(to_disk(z))).real, abs_tol=1e-9)


def test_huge_entries_displacement():
    g = SL2Matrix.identity()
    for _ in range(800):
        g = g @ A @ B
    d = displacement(g)
    assert math.isfinite(d) and d > 1000
    # additivity along an axis: d(o, g^2 o) ~ 2 d(o, g o)
    assert abs(displacement(g @ g) - 2 * d) < 2.0


def test_boundary_proxy_depth_guard():
    with pytest.raises(InsufficientDepthError):
        boundary_proxy(A @ B)
    g = SL2Matrix.identity()
    for _ in range(10):
        g = g @ A @ B
    s = boundary_proxy(g)
    assert 0 <= s.angle < 2 * math.pi and s.depth >= 15


def test_circle_quasimetric():
    assert circle_visual_quasimetric(0.0, math.pi) == 1.0
    assert math.isclose(circle_visual_quasimetric(0.1, 0.3), math.sin(0.1))


def test_boundary_interior_product_along_geodesic():
    # points i*t for t -> 0 converge to the boundary point 0 (angle pi on the disk)
    for t in (1e-2, 1e-4):
        z = complex(0, t)
        assert math.isclose(boundary_interior_product(math.pi, z), hyp_distance(1j, z),
                            rel_tol=1e-6)


def test_float_batch_matches_bigint(sanov_srw):
    G = sanov_srw.model
    n, width = 300, 64
    batch = SL2WalkBatch(sanov_srw, 11, 0, width)
    batch.advance(n)
    dist = batch.distance()
    ang = batch.angles()
    for i in range(0, width, 7):
        g = sample_trajectory(sanov_srw, n, 11, i).endpoint
        assert math.isclose(dist[i], displacement(g), rel_tol=1e-12, abs_tol=1e-12)
        ref = matrix_boundary_angle(*(float(v >> max(0, max(abs(x) for x in g).bit_length() - 500))
                                      for v in g))
        assert abs(math.remainder(ang[i] - ref, 2 * math.pi)) < 1e-10
    assert isinstance(G, SL2Group)


def test_group_word_lookup(sanov):
    g = sanov.multiply(sanov.element("a"), sanov.element("B"))
    assert sanov.word_of(g) == "aB"
    assert sanov.evaluate("ab") == A @ B


def test_step_distribution_sl2(sanov):
    mu = StepDistribution.simple(sanov)
    assert mu.is_nearest_neighbor()
    back = StepDistribution.from_json(mu.to_json(), sanov)
    assert back == mu
    assert np.isclose(sum(mu.probs), 1.0)
