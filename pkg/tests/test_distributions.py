from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate, stats

from avguard.errors import ConfigInvalid
from avguard.evaluation.distributions import (
    DiscreteGridModel,
    ScenarioModel,
    TruncatedExponential,
    TruncatedNormal,
    Uniform,
    distribution_from_dict,
)

DISTS = [
    TruncatedNormal(30.0, 8.0, 0.0, 60.0),
    TruncatedNormal(5.0, 8.0, 0.0, 60.0),
    TruncatedNormal(0.0, 1.0, 6.0, math.inf),  # deep tail: needs the log-space normaliser
    TruncatedExponential(1.0, 0.0, 12.0),
    TruncatedExponential(-0.4, 0.0, 12.0),  # proposals may lean toward the upper bound
    TruncatedExponential(1e-9, 0.0, 12.0),
    Uniform(0.0, 5.0),
]


@pytest.mark.parametrize("d", DISTS, ids=repr)
def test_density_integrates_to_one(d):
    lo = d.lo
    hi = d.hi if math.isfinite(d.hi) else lo + 40.0
    total, _ = integrate.quad(lambda x: math.exp(float(d.logpdf(x))), lo, hi, points=None, limit=200)
    assert total == pytest.approx(1.0, rel=1e-7)


@pytest.mark.parametrize("d", DISTS, ids=repr)
def test_samples_stay_in_support_and_match_mean(d):
    x = d.sample(np.random.default_rng(3), 40_000)
    assert np.all(x >= d.lo) and np.all(x <= d.hi)
    hi = d.hi if math.isfinite(d.hi) else d.lo + 40.0
    mean, _ = integrate.quad(lambda t: t * math.exp(float(d.logpdf(t))), d.lo, hi, limit=200)
    sd = math.sqrt(integrate.quad(lambda t: (t - mean) ** 2 * math.exp(float(d.logpdf(t))), d.lo, hi, limit=200)[0])
    assert abs(x.mean() - mean) < 5 * sd / math.sqrt(x.size)


def test_truncnorm_logpdf_matches_scipy():
    d = TruncatedNormal(30.0, 8.0, 0.0, 60.0)
    x = np.linspace(0.0, 60.0, 13)
    ref = stats.truncnorm((0 - 30) / 8, (60 - 30) / 8, loc=30, scale=8).logpdf(x)
    assert np.allclose(d.logpdf(x), ref, rtol=1e-12, atol=1e-12)
    assert d.logpdf(-1.0) == -np.inf


def test_truncexp_logpdf_closed_form():
    d = TruncatedExponential(0.5, 0.0, 12.0)
    x = np.array([0.1, 3.0, 11.9])
    ref = np.log(0.5) - 0.5 * x - np.log1p(-np.exp(-6.0))
    assert np.allclose(d.logpdf(x), ref, rtol=1e-13)
    assert d.logpdf(12.5) == -np.inf


def test_truncexp_weighted_fit_solves_the_mean_equation():
    d = TruncatedExponential(1.0, 0.0, 12.0)
    x = np.array([1.0, 4.0, 9.0, 11.0])
    w = np.array([1.0, 2.0, 3.0, 4.0])
    fitted = d.fit_weighted(x, w)
    assert fitted.mean() == pytest.approx(np.average(x, weights=w), rel=1e-9)
    assert fitted.rate < 0  # mean above the midpoint: mass leans to the upper bound


def test_truncnorm_weighted_fit():
    d = TruncatedNormal(0.0, 1.0)
    x = np.array([1.0, 2.0, 4.0])
    w = np.array([1.0, 1.0, 2.0])
    f = d.fit_weighted(x, w)
    mu = np.average(x, weights=w)
    assert f.mu == pytest.approx(mu)
    assert f.sigma == pytest.approx(math.sqrt(np.average((x - mu) ** 2, weights=w)))
    assert d.fit_weighted(x, w, update_scale=False).sigma == 1.0


def test_bad_parameters():
    with pytest.raises(ConfigInvalid):
        TruncatedNormal(0.0, 0.0)
    with pytest.raises(ConfigInvalid):
        TruncatedNormal(0.0, 1.0, 2.0, 1.0)
    with pytest.raises(ConfigInvalid):
        TruncatedExponential(math.nan)
    with pytest.raises(ConfigInvalid):
        distribution_from_dict({"dist": "cauchy"})


def test_model_round_trip_and_logpdf_is_sum():
    m = ScenarioModel.of(a=TruncatedNormal(1.0, 2.0, -5.0, 5.0), b=TruncatedExponential(0.7, 0.0, 12.0),
                         c=Uniform(0.0, 5.0))
    assert ScenarioModel.from_dict(m.to_dict()) == m
    X = m.sample(np.random.default_rng(0), 5)
    expect = m["a"].logpdf(X[:, 0]) + m["b"].logpdf(X[:, 1]) + m["c"].logpdf(X[:, 2])
    assert np.allclose(m.logpdf(X), expect)
    assert m.subset(("b",)).fields == ("b",)


def test_grid_model_atoms_sum_to_one_and_match_logpdf():
    g = DiscreteGridModel.of(a=([0.0, 1.0, 2.0], [1, 2, 1]), b=([5.0, 7.0], [3, 1]))
    X, p = g.atoms()
    assert g.n_atoms == 6 and p.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(np.exp(g.logpdf(X)), p)
    assert g.logpdf(np.array([[0.5, 5.0]]))[0] == -np.inf
    draws = g.sample(np.random.default_rng(1), 60_000)
    freq = np.mean(draws[:, 0] == 1.0)
    assert freq == pytest.approx(0.5, abs=0.01)
