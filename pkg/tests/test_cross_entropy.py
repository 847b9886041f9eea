from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from oracles import brake_grid_model, brake_margin
from scipy import stats

from avguard.evaluation import (
    AboveThreshold,
    Constant,
    FunctionIndicator,
    NoEliteProgress,
    ScenarioModel,
    TruncatedNormal,
    cross_entropy_search,
    is_estimate,
)


def _normal():
    return ScenarioModel.of(x=TruncatedNormal(0.0, 1.0))


def _best_tilt_mean(threshold=4.0):
    """Proposal mean N(m, 1) with the smallest IS second moment for
    P(X > threshold): E_g[(1{X>t} f/g)^2] = exp(m^2) * sf(t + m)."""
    grid = np.arange(3.0, 5.5, 0.001)
    second = grid**2 + stats.norm.logsf(threshold + grid)
    return float(grid[np.argmin(second)])


def test_tail_tilt_converges_near_threshold():
    prop = cross_entropy_search(AboveThreshold(4.0), _normal(), iters=10, n_per_iter=1000, rho=0.1, seed=0,
                                update_scale=False)
    mu = prop.model["x"].mu
    assert abs(mu - 4.0) < 0.5
    assert abs(mu - _best_tilt_mean()) < 0.5
    assert all(b <= a for a, b in zip(prop.levels, prop.levels[1:]))
    assert prop.levels[-1] == 0.0
    assert not prop.no_elite_progress


def test_levels_never_increase_with_scale_updates():
    prop = cross_entropy_search(AboveThreshold(4.0), _normal(), iters=10, n_per_iter=500, seed=3)
    assert all(b <= a for a, b in zip(prop.levels, prop.levels[1:]))
    assert prop.model["x"].sigma >= 0.5


def test_common_event_converges_fast():
    thr = float(stats.norm.isf(0.3))
    prop = cross_entropy_search(AboveThreshold(thr), _normal(), iters=10, n_per_iter=4000, seed=1)
    assert prop.iterations <= 2
    # weighted MLE of the hit region: mean of N(0,1) given X > thr
    cond_mean = stats.norm.pdf(thr) / 0.3
    assert prop.model["x"].mu == pytest.approx(cond_mean, abs=0.05)


def test_unreachable_event_warns_and_returns_best():
    with pytest.warns(NoEliteProgress):
        prop = cross_entropy_search(Constant(False), _normal(), iters=3, n_per_iter=50, seed=0)
    assert prop.no_elite_progress and prop.iterations == 3


def test_stops_after_two_levels_at_zero():
    prop = cross_entropy_search(AboveThreshold(2.0), _normal(), iters=10, n_per_iter=1000, seed=0)
    assert prop.levels[-2:] == (0.0, 0.0)
    assert prop.iterations == len(prop.levels) < 10


def test_fit_fields_restricts_the_tilt():
    m = ScenarioModel.of(x=TruncatedNormal(0.0, 1.0), y=TruncatedNormal(0.0, 1.0))
    prop = cross_entropy_search(AboveThreshold(3.0, column=0), m, iters=6, n_per_iter=500, seed=0,
                                fit_fields=("x",))
    assert prop.model["y"] == m["y"]
    assert prop.model["x"].mu > 2.0


def test_deterministic_given_seed():
    a = cross_entropy_search(AboveThreshold(3.0), _normal(), iters=5, n_per_iter=300, seed=4)
    b = cross_entropy_search(AboveThreshold(3.0), _normal(), iters=5, n_per_iter=300, seed=4)
    assert a == b


def test_grid_problem_tilt_is_usable():
    nominal = brake_grid_model()
    ind = FunctionIndicator(brake_margin)
    with warnings.catch_warnings():
        warnings.simplefilter("error", NoEliteProgress)
        prop = cross_entropy_search(ind, nominal, iters=10, n_per_iter=2000, seed=1)
    est = is_estimate(ind, nominal, prop, 2000, seed=2)
    assert est.hits > 100 and math.isfinite(est.std_err)
