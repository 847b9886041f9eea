"""Independent per-parameter scenario distributions with log densities.

Every family keeps its truncation bounds when it is re-fitted, so a tilted
proposal always shares the support of the nominal model it came from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, special, stats

from ..errors import ConfigInvalid, DegenerateVariance

SIGMA_FLOOR = 1e-6


def _weighted_mean_std(x, w):
    w = np.asarray(w, dtype=float)
    total = w.sum()
    mu = float(np.dot(w, x) / total)
    var = float(np.dot(w, (x - mu) ** 2) / total)
    return mu, math.sqrt(max(var, 0.0))


@dataclass(frozen=True)
class TruncatedNormal:
    mu: float
    sigma: float
    lo: float = -math.inf
    hi: float = math.inf

    family = "truncnorm"

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ConfigInvalid(f"sigma must be positive, got {self.sigma}")
        if not self.lo < self.hi:
            raise ConfigInvalid(f"empty support ({self.lo}, {self.hi})")

    @property
    def _frozen(self):
        a = (self.lo - self.mu) / self.sigma
        b = (self.hi - self.mu) / self.sigma
        return stats.truncnorm(a, b, loc=self.mu, scale=self.sigma)

    @property
    def log_norm(self) -> float:
        """log of the probability mass the untruncated normal puts on the support."""
        a = (self.lo - self.mu) / self.sigma
        b = (self.hi - self.mu) / self.sigma
        # log(Phi(b) - Phi(a)), evaluated on the far side of the mean for accuracy
        if a > 0:
            return float(special.log_ndtr(-a) + np.log1p(-np.exp(special.log_ndtr(-b) - special.log_ndtr(-a))))
        return float(special.log_ndtr(b) + np.log1p(-np.exp(special.log_ndtr(a) - special.log_ndtr(b))))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        z = (x - self.mu) / self.sigma
        out = -0.5 * z * z - math.log(self.sigma) - 0.5 * math.log(2 * math.pi) - self.log_norm
        return np.where((x >= self.lo) & (x <= self.hi), out, -np.inf)

    def cdf(self, x):
        return self._frozen.cdf(x)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.asarray(self._frozen.ppf(rng.random(n)), dtype=float)

    def fit_weighted(self, x, w, update_scale: bool = True) -> "TruncatedNormal":
        mu, sd = _weighted_mean_std(x, w)
        if not update_scale:
            return replace(self, mu=mu)
        return replace(self, mu=mu, sigma=max(sd, SIGMA_FLOOR))

    def params(self) -> dict:
        return {"dist": self.family, "mu": self.mu, "sigma": self.sigma, "lo": self.lo, "hi": self.hi}


def _texp_mean(rate: float, lo: float, hi: float) -> float:
    """Mean of the exponential family density ∝ exp(-rate·x) on [lo, hi]."""
    width = hi - lo
    u = rate * width
    if abs(u) < 1e-8:
        return lo + width / 2
    if u > 700:
        return lo + 1.0 / rate
    if u < -700:
        return hi + 1.0 / rate
    # mean offset = 1/rate - width / expm1(rate·width)
    return lo + 1.0 / rate - width / math.expm1(u)


@dataclass(frozen=True)
class TruncatedExponential:
    """Density ∝ exp(-rate·(x - lo)) on (lo, hi].

    The nominal model needs ``rate > 0``; a tilted proposal may take any real
    rate, a non-positive one piling mass toward ``hi``.
    """

    rate: float
    lo: float = 0.0
    hi: float = 12.0

    family = "truncexp"

    def __post_init__(self):
        if not math.isfinite(self.rate):
            raise ConfigInvalid("rate must be finite")
        if not (self.lo < self.hi and math.isfinite(self.hi)):
            raise ConfigInvalid(f"bad support ({self.lo}, {self.hi}]")

    @property
    def log_norm(self) -> float:
        u = self.rate * (self.hi - self.lo)
        if abs(u) < 1e-12:
            return math.log(self.hi - self.lo)
        # log ∫ exp(-rate t) dt over [0, width] = log(-expm1(-u) / rate)
        if u > 0:
            return math.log(-math.expm1(-u)) - math.log(self.rate)
        return -u + math.log(-math.expm1(u)) - math.log(-self.rate)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        out = -self.rate * (x - self.lo) - self.log_norm
        return np.where((x > self.lo) & (x <= self.hi), out, -np.inf)

    def mean(self) -> float:
        return _texp_mean(self.rate, self.lo, self.hi)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random(n)
        width = self.hi - self.lo
        r = self.rate
        if abs(r * width) < 1e-12:
            return self.lo + width * (1.0 - u)
        # inverse CDF; 1-u keeps draws inside (lo, hi]
        t = -np.log1p((1.0 - u) * math.expm1(-r * width)) / r
        return self.lo + np.clip(t, np.nextafter(0.0, 1.0), width)

    def fit_weighted(self, x, w, update_scale: bool = True) -> "TruncatedExponential":
        """Weighted MLE: the rate whose truncated mean matches the data."""
        mu, _ = _weighted_mean_std(x, w)
        width = self.hi - self.lo
        eps = width * 1e-9
        mu = min(max(mu, self.lo + eps), self.hi - eps)
        target = mu

        def gap(r):
            return _texp_mean(r, self.lo, self.hi) - target

        bound = 1.0 / width
        lo_r, hi_r = -bound, bound
        while gap(lo_r) < 0:
            lo_r *= 2
        while gap(hi_r) > 0:
            hi_r *= 2
        rate = optimize.brentq(gap, lo_r, hi_r, xtol=1e-14, rtol=1e-12)
        return replace(self, rate=float(rate))

    def params(self) -> dict:
        return {"dist": self.family, "rate": self.rate, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    family = "uniform"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigInvalid(f"empty support ({self.lo}, {self.hi}]")

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x > self.lo) & (x <= self.hi), -math.log(self.hi - self.lo), -np.inf)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.hi - (self.hi - self.lo) * rng.random(n)

    def fit_weighted(self, x, w, update_scale: bool = True) -> "Uniform":
        return self

    def params(self) -> dict:
        return {"dist": self.family, "lo": self.lo, "hi": self.hi}


def distribution_from_dict(d: dict):
    kind = d.get("dist")
    inf = math.inf
    if kind == TruncatedNormal.family:
        return TruncatedNormal(float(d["mu"]), float(d["sigma"]), float(d.get("lo", -inf)), float(d.get("hi", inf)))
    if kind == TruncatedExponential.family:
        if "mean" in d and "rate" not in d:
            rate = 1.0 / float(d["mean"])
        else:
            rate = float(d["rate"])
        return TruncatedExponential(rate, float(d.get("lo", 0.0)), float(d.get("hi", 12.0)))
    if kind == Uniform.family:
        return Uniform(float(d["lo"]), float(d["hi"]))
    raise ConfigInvalid(f"unknown distribution {kind!r}")


@dataclass(frozen=True)
class ScenarioModel:
    """Product of independent per-field distributions, in field order."""

    fields: tuple[str, ...]
    dists: tuple = field(default=())

    def __post_init__(self):
        if len(self.fields) != len(self.dists):
            raise ConfigInvalid("one distribution per field")

    @classmethod
    def of(cls, **dists) -> "ScenarioModel":
        return cls(tuple(dists), tuple(dists.values()))

    def __getitem__(self, name: str):
        return self.dists[self.fields.index(name)]

    @property
    def dim(self) -> int:
        return len(self.fields)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if n == 0:
            return np.empty((0, self.dim))
        return np.column_stack([d.sample(rng, n) for d in self.dists])

    def logpdf(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(X.shape[0])
        for j, d in enumerate(self.dists):
            out = out + d.logpdf(X[:, j])
        return out

    def fit_weighted(self, X, w, update_scale: bool = True) -> "ScenarioModel":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return ScenarioModel(
            self.fields, tuple(d.fit_weighted(X[:, j], w, update_scale) for j, d in enumerate(self.dists))
        )

    def subset(self, names) -> "ScenarioModel":
        names = tuple(names)
        return ScenarioModel(names, tuple(self[n] for n in names))

    def with_field(self, name: str, dist) -> "ScenarioModel":
        dists = list(self.dists)
        dists[self.fields.index(name)] = dist
        return ScenarioModel(self.fields, tuple(dists))

    def validate_nominal(self) -> None:
        for name, d in zip(self.fields, self.dists):
            if isinstance(d, TruncatedExponential) and d.rate <= 0:
                raise DegenerateVariance(f"{name}: exponential rate must be positive")

    def to_dict(self) -> dict:
        return {name: d.params() for name, d in zip(self.fields, self.dists)}

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioModel":
        return cls(tuple(d), tuple(distribution_from_dict(v) for v in d.values()))


@dataclass(frozen=True)
class DiscreteGridModel:
    """Independent discrete distributions on finite per-field grids.

    Stands in for a quantized scenario space so that probabilities can be
    computed exactly by enumeration."""

    fields: tuple[str, ...]
    values: tuple[np.ndarray, ...]
    probs: tuple[np.ndarray, ...]

    @classmethod
    def of(cls, **spec) -> "DiscreteGridModel":
        names, vals, probs = [], [], []
        for name, (v, p) in spec.items():
            v = np.asarray(v, dtype=float)
            p = np.asarray(p, dtype=float)
            if v.shape != p.shape or np.any(p <= 0):
                raise ConfigInvalid(f"{name}: probabilities must be positive and match the grid")
            names.append(name)
            vals.append(v)
            probs.append(p / p.sum())
        return cls(tuple(names), tuple(vals), tuple(probs))

    @property
    def dim(self) -> int:
        return len(self.fields)

    @property
    def n_atoms(self) -> int:
        return int(np.prod([len(v) for v in self.values]))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        cols = []
        for v, p in zip(self.values, self.probs):
            idx = np.searchsorted(np.cumsum(p), rng.random(n), side="right")
            cols.append(v[np.minimum(idx, len(v) - 1)])
        return np.column_stack(cols)

    def logpdf(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(X.shape[0])
        for j, (v, p) in enumerate(zip(self.values, self.probs)):
            idx = np.searchsorted(v, X[:, j])
            idx = np.minimum(idx, len(v) - 1)
            hit = v[idx] == X[:, j]
            out = out + np.where(hit, np.log(p[idx]), -np.inf)
        return out

    def fit_weighted(self, X, w, update_scale: bool = True) -> "DiscreteGridModel":
        """Weighted frequencies, mixed with a little uniform mass so that every
        atom keeps positive probability."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        w = np.asarray(w, dtype=float)
        probs = []
        for j, v in enumerate(self.values):
            idx = np.searchsorted(v, X[:, j])
            freq = np.bincount(idx, weights=w, minlength=len(v)) / w.sum()
            probs.append(0.95 * freq + 0.05 / len(v))
        return DiscreteGridModel(self.fields, self.values, tuple(probs))

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """All grid points and their probabilities."""
        grids = np.meshgrid(*self.values, indexing="ij")
        pgrids = np.meshgrid(*self.probs, indexing="ij")
        X = np.column_stack([g.ravel() for g in grids])
        p = np.prod(np.column_stack([g.ravel() for g in pgrids]), axis=1)
        return X, p
