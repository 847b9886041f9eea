"""Crude Monte Carlo and importance-sampling estimates of a rare-event probability."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import EvaluationError, NonFiniteWeight, ZeroHits

Z95 = 1.959963984540054


@dataclass(frozen=True)
class Estimate:
    p_hat: float
    std_err: float
    ci95: tuple[float, float]
    n: int
    sum_w: float  # sum of indicator * likelihood ratio
    sum_w2: float  # sum of its squares
    hits: int

    @property
    def rel_err(self) -> float:
        return self.std_err / self.p_hat if self.p_hat > 0 else math.inf

    def as_dict(self) -> dict:
        return {
            "p_hat": self.p_hat,
            "std_err": self.std_err,
            "ci_lo": self.ci95[0],
            "ci_hi": self.ci95[1],
            "n": self.n,
            "hits": self.hits,
        }


def estimate_from_terms(terms: np.ndarray, hits: int) -> Estimate:
    """Summarize the per-sample terms ``ind(X_i) * w_i``.

    Shared by crude MC (all weights one) and importance sampling so that an
    identity tilt reproduces the crude estimate bit for bit."""
    terms = np.asarray(terms, dtype=float)
    n = terms.size
    if n < 1:
        raise EvaluationError("need at least one sample")
    sum_w = float(np.sum(terms))
    sum_w2 = float(np.sum(terms * terms))
    p = sum_w / n
    var = max(sum_w2 / n - p * p, 0.0)
    se = math.sqrt(var / n)
    lo = min(max(p - Z95 * se, 0.0), 1.0)
    hi = min(max(p + Z95 * se, 0.0), 1.0)
    return Estimate(min(max(p, 0.0), 1.0), se, (lo, hi), n, sum_w, sum_w2, int(hits))


def _indicator_values(ind, X) -> np.ndarray:
    hits = np.asarray(ind(X), dtype=bool)
    if hits.shape != (X.shape[0],):
        raise EvaluationError("indicator must return one value per scenario")
    return hits


def crude_mc_estimate(ind, model, n: int, seed: int) -> Estimate:
    if n < 1:
        raise EvaluationError("n must be at least 1")
    rng = np.random.default_rng(seed)
    X = model.sample(rng, n)
    hits = _indicator_values(ind, X)
    return estimate_from_terms(hits.astype(float), int(hits.sum()))


def log_weights(nominal, proposal, X) -> np.ndarray:
    """log f(X)/g(X), checked finite at every drawn point."""
    lf = nominal.logpdf(X)
    lg = proposal.logpdf(X)
    lw = lf - lg
    bad = np.flatnonzero(~np.isfinite(lw))
    if bad.size:
        i = int(bad[0])
        raise NonFiniteWeight(
            f"likelihood ratio at draw {i} is not finite (log f={lf[i]}, log g={lg[i]})", i, np.asarray(X[i])
        )
    return lw


def is_estimate(ind, nominal, proposal, n: int, seed: int, return_samples: bool = False):
    """Importance-sampling estimate of P_nominal(ind(X) = 1) from draws of
    ``proposal``."""
    if n < 1:
        raise EvaluationError("n must be at least 1")
    rng = np.random.default_rng(seed)
    X = proposal.sample(rng, n)
    lw = log_weights(nominal, proposal, X)
    hits = _indicator_values(ind, X)
    w = np.exp(lw)
    if np.any(w[hits] <= 0) or not np.all(np.isfinite(w[hits])):
        i = int(np.flatnonzero(hits & ((w <= 0) | ~np.isfinite(w)))[0])
        raise NonFiniteWeight(f"likelihood ratio at draw {i} under- or overflowed", i, np.asarray(X[i]))
    terms = np.where(hits, w, 0.0)
    est = estimate_from_terms(terms, int(hits.sum()))
    if return_samples:
        return est, X, w, hits
    return est


def acceleration_factor(est: Estimate, target_rel_err: float = 0.1) -> float:
    """Crude-MC sample count over IS sample count for the same relative error.

    n_MC = (1-p)/(p r^2); n_IS = (per-sample relative variance)/r^2, never
    below one sample."""
    if est.hits == 0 or est.p_hat <= 0:
        raise ZeroHits("no hits: the acceleration factor is undefined")
    if not target_rel_err > 0:
        raise EvaluationError("target relative error must be positive")
    p = est.p_hat
    r2 = target_rel_err * target_rel_err
    n_mc = (1.0 - p) / (p * r2)
    rel_var = (est.std_err * math.sqrt(est.n) / p) ** 2
    n_is = max(rel_var / r2, 1.0)
    return n_mc / n_is


def required_samples(est: Estimate, target_rel_err: float = 0.1) -> tuple[float, float]:
    """(n_MC, n_IS) needed for the target relative error."""
    p = est.p_hat
    r2 = target_rel_err * target_rel_err
    rel_var = (est.std_err * math.sqrt(est.n) / p) ** 2
    return (1.0 - p) / (p * r2), max(rel_var / r2, 1.0)
