"""Cross-entropy search for an importance-sampling proposal.

Each iteration draws from the current proposal, takes the rho-quantile of the
severities as the next level (never above the previous one, never below the
crash level 0) and refits the proposal by likelihood-ratio weighted maximum
likelihood on the samples at or below that level.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields, replace

import numpy as np

from ..errors import EvaluationError
from .estimators import log_weights


class NoEliteProgress(UserWarning):
    """The level never reached the crash set; the best proposal so far is returned."""


@dataclass(frozen=True)
class Proposal:
    model: object  # same family as the nominal model
    levels: tuple[float, ...] = ()
    iterations: int = 0
    no_elite_progress: bool = False
    hit_rate: float = 0.0  # fraction of hits among the last iteration's draws
    episodes: int = 0

    def sample(self, rng, n):
        return self.model.sample(rng, n)

    def logpdf(self, X):
        return self.model.logpdf(X)


def _smooth(old, new, alpha: float):
    if alpha >= 1.0:
        return new
    changes = {}
    for f in fields(new):
        a, b = getattr(old, f.name), getattr(new, f.name)
        if isinstance(a, (int, float)) and isinstance(b, (int, float)) and f.name not in ("lo", "hi"):
            changes[f.name] = alpha * b + (1 - alpha) * a
    return replace(new, **changes)


def _refit(model, nominal, X, w, alpha, fit_fields, update_scale, min_scale_ratio):
    new = model.fit_weighted(X, w, update_scale)
    if not hasattr(model, "dists"):
        return new
    dists = []
    for name, old_d, new_d, nom_d in zip(model.fields, model.dists, new.dists, nominal.dists):
        if fit_fields is not None and name not in fit_fields:
            dists.append(old_d)
            continue
        d = _smooth(old_d, new_d, alpha)
        if hasattr(d, "sigma") and d.sigma < min_scale_ratio * nom_d.sigma:
            d = replace(d, sigma=min_scale_ratio * nom_d.sigma)
        dists.append(d)
    return type(model)(model.fields, tuple(dists))


def cross_entropy_search(ind, nominal, iters: int = 10, n_per_iter: int = 1000, rho: float = 0.1,
                         seed: int = 0, smoothing: float = 1.0, fit_fields=None, update_scale: bool = True,
                         min_scale_ratio: float = 0.5) -> Proposal:
    """Tilt ``nominal`` toward the hit set of ``ind``.

    ``fit_fields`` restricts the tilt to some fields, ``update_scale=False``
    moves only locations (the exponential tilt of a normal), and scales never
    shrink below ``min_scale_ratio`` times the nominal scale.
    """
    if iters < 1:
        raise EvaluationError("iters must be at least 1")
    if not 0 < rho < 1:
        raise EvaluationError("rho must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    current = nominal
    levels: list[float] = []
    gamma_prev = math.inf
    at_crash = 0
    hit_rate = 0.0
    episodes = 0
    it = 0
    for it in range(1, iters + 1):
        X = current.sample(rng, n_per_iter)
        sev = np.asarray(ind.severity(X), dtype=float)
        episodes += n_per_iter
        hit_rate = float(np.mean(sev <= 0.0))
        q = float(np.quantile(sev, rho, method="inverted_cdf"))
        gamma = min(max(q, 0.0), gamma_prev)
        levels.append(gamma)
        elite = sev <= gamma
        if np.any(elite):
            lw = log_weights(nominal, current, X[elite])
            w = np.exp(lw - lw.max())  # a common scale does not change the weighted MLE
            current = _refit(current, nominal, X[elite], w, smoothing, fit_fields, update_scale, min_scale_ratio)
        gamma_prev = gamma
        at_crash = at_crash + 1 if gamma <= 0.0 else 0
        if at_crash >= 2:
            break
    stuck = not levels or levels[-1] > 0.0
    if stuck:
        warnings.warn(
            f"cross-entropy level stalled at {levels[-1]:.4g} after {it} iterations", NoEliteProgress, stacklevel=2
        )
    return Proposal(current, tuple(levels), it, stuck, hit_rate, episodes)
