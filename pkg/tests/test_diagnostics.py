import math

import numpy as np
import pytest

from hmdim._validation import InvalidInputError, UnsupportedModelError
from hmdim.estimators import (
    continuity_experiment,
    event_A_diagnostic,
    sample_boundary_cloud,
    shadow_hit_diagnostic,
    stationarity_test,
    tracking_diagnostic,
    uniform_free_cloud,
)
from hmdim.estimators.diagnostics import tracking_distances

H_SRW = 0.5 * math.log(3)


def test_tracking_distance_bounds(srw):
    d = tracking_distances(srw, 0.5, 200, 300, seed=1)
    assert d.min() >= 0
    assert d.max() <= 200 + 100


def test_tracking_large_eps_trivial(srw):
    assert tracking_diagnostic(srw.model, srw, 0.5, 100, 300, 2.0, seed=1).value == 1.0


def test_tracking_improves_with_n(srw):
    a = tracking_diagnostic(srw.model, srw, 0.5, 50, 1000, 0.2, seed=2).value
    b = tracking_diagnostic(srw.model, srw, 0.5, 500, 1000, 0.2, seed=2).value
    assert b >= a


def test_event_A_trivial_and_monotone(srw):
    r = event_A_diagnostic(srw.model, srw, H_SRW, 0.5, 2.5, [6, 10], horizon=10, M=500, seed=3)
    assert r.value == 1.0
    r = event_A_diagnostic(srw.model, srw, H_SRW, 0.5, 0.3, [6, 8, 10], horizon=10, M=2000, seed=3)
    by = r.details["by_N"]
    assert by["6"] <= by["8"] <= by["10"]
    with pytest.raises(InvalidInputError):
        event_A_diagnostic(srw.model, srw, H_SRW, 0.5, 0.3, [12], horizon=10, M=10)


def test_shadow_hit_and_control(srw):
    hit = shadow_hit_diagnostic(srw.model, srw, 0.5, 2, 0.3, 400, 500, seed=4)
    assert hit.value == 1.0 and hit.details["conditioned"] > 0
    ctl = shadow_hit_diagnostic(srw.model, srw, 0.5, 2, 0.3, 400, 500, seed=4, control=True)
    assert ctl.value < 1.0


def test_shadow_hit_vacuous_warning(srw):
    with pytest.warns(RuntimeWarning, match="vacuous"):
        r = shadow_hit_diagnostic(srw.model, srw, 0.5, 2, 0.001, 100, 100, seed=4)
    assert r.warning


def test_diagnostics_need_free_model(sanov_srw):
    with pytest.raises(UnsupportedModelError):
        tracking_diagnostic(sanov_srw.model, sanov_srw, 0.6, 10, 10, 0.2)


def test_stationarity_pass_and_wrong_measure(srw, biased):
    good = sample_boundary_cloud(biased.model, biased, 40, 20000, seed=5)
    r = stationarity_test(good, biased)
    assert r.details["passes"]
    assert r.warning  # below 10^5 samples
    wrong = uniform_free_cloud(2, 40, 20000, 5)
    assert not stationarity_test(wrong, biased).details["passes"]
    assert stationarity_test(wrong, srw).details["passes"]


def test_stationarity_longer_atoms(F2):
    from hmdim.walks import StepDistribution

    mu = StepDistribution(F2, {"ab": 0.3, "BA": 0.3, "a": 0.2, "A": 0.2})
    cloud = sample_boundary_cloud(F2, mu, 40, 20000, seed=6)
    assert stationarity_test(cloud, mu).details["passes"]


def test_continuity_zero_perturbation(srw):
    res = continuity_experiment(srw.model, srw, [0.0, 0.1], "a", depth=40, M=20000, seed=1,
                                radii=np.exp(-np.arange(1.0, 7.01, 0.5)))
    zero = res["rows"][0]
    assert zero.delta == 0.0 and zero.diff == 0.0
    assert res["rows"][1].l1 > 0
