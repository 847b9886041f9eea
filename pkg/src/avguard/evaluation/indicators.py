"""Rare-event indicators that also expose a continuous severity.

A scenario is a hit exactly when its severity is <= 0; lower severity means
closer to (or deeper into) the event.  The cross-entropy search climbs the
severity, the estimators only look at hits.
"""

from __future__ import annotations

import numpy as np


class Indicator:
    def severity(self, X) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, X) -> np.ndarray:
        return self.severity(X) <= 0.0


class FunctionIndicator(Indicator):
    """Wraps a vectorized severity function of the sample matrix."""

    def __init__(self, fn):
        self.fn = fn

    def severity(self, X) -> np.ndarray:
        return np.asarray(self.fn(np.atleast_2d(X)), dtype=float)


class BelowThreshold(Indicator):
    """Hit when column ``column`` is at or below ``threshold``."""

    def __init__(self, threshold: float, column: int = 0):
        self.threshold = threshold
        self.column = column

    def severity(self, X) -> np.ndarray:
        return np.atleast_2d(X)[:, self.column] - self.threshold


class AboveThreshold(Indicator):
    """Hit when column ``column`` is at or above ``threshold``."""

    def __init__(self, threshold: float, column: int = 0):
        self.threshold = threshold
        self.column = column

    def severity(self, X) -> np.ndarray:
        return self.threshold - np.atleast_2d(X)[:, self.column]


class Constant(Indicator):
    def __init__(self, hit: bool):
        self.hit = hit

    def severity(self, X) -> np.ndarray:
        return np.full(np.atleast_2d(X).shape[0], -1.0 if self.hit else 1.0)
