"""Follow-back response delays.

A delay is "instant" (uniform over the first poll interval) with probability
w and log-normal otherwise. w, mu and sigma are solved so that the CDF hits
the requested shares at 5 minutes and 1 hour and 0.5 at the median.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

FIVE_MIN = 300.0
ONE_HOUR = 3600.0


@dataclass(frozen=True)
class DelayModel:
    instant_weight: float
    mu: float  # log-seconds
    sigma: float
    instant_max: float = FIVE_MIN

    def cdf(self, seconds: float) -> float:
        inst = min(max(seconds / self.instant_max, 0.0), 1.0)
        logn = ndtr((math.log(seconds) - self.mu) / self.sigma) if seconds > 0 else 0.0
        return self.instant_weight * inst + (1.0 - self.instant_weight) * logn

    def sample(self, rng: np.random.Generator, size=None):
        inst = rng.random(size) < self.instant_weight
        u = rng.uniform(1.0, self.instant_max, size)
        ln = np.exp(self.mu + self.sigma * rng.standard_normal(size))
        return np.where(inst, u, ln)


@lru_cache(maxsize=256)
def delay_model(median_hours: float, within_5min: float = 0.10, within_1h: float = 0.22) -> DelayModel:
    if not 0 < within_5min < within_1h < 0.5:
        raise ValueError("need 0 < P(5 min) < P(1 h) < 0.5")
    med = median_hours * ONE_HOUR
    if med <= ONE_HOUR:
        raise ValueError("median response time must exceed one hour")

    def solve(w):
        z2 = ndtri((within_1h - w) / (1 - w))
        z3 = ndtri((0.5 - w) / (1 - w))
        sigma = (math.log(med) - math.log(ONE_HOUR)) / (z3 - z2)
        mu = math.log(ONE_HOUR) - sigma * z2
        return mu, sigma

    def gap(w):
        mu, sigma = solve(w)
        have = ndtr((math.log(FIVE_MIN) - mu) / sigma)
        return (within_5min - w) / (1 - w) - have

    lo, hi = 0.0, within_5min * (1 - 1e-9)
    if gap(lo) <= 0:
        # a pure log-normal already puts enough mass below five minutes
        mu, sigma = solve(0.0)
        return DelayModel(0.0, mu, sigma)
    w = brentq(gap, lo, hi, xtol=1e-14)
    mu, sigma = solve(w)
    return DelayModel(w, mu, sigma)


def observed(delays, poll_seconds: int = 300):
    """Delay as seen by a poller running every ``poll_seconds`` from the follow time."""
    return np.ceil(np.asarray(delays, dtype=float) / poll_seconds).astype(np.int64) * poll_seconds
