"""Sufficient statistics and Gaussian maximum-likelihood machinery.

Cumulative sums of shift-conditioned values give O(1) mean/variance/
log-likelihood queries over any interval of the movement series.  Variances
are always the maximum-likelihood (divide-by-n) form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadIntervalError,
    DegenerateVarianceError,
    EmptyDataError,
)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianStats:
    """MLE summary of a sample: count, mean, divide-by-n variance."""

    n: int
    mean: float
    variance: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True, eq=False)
class PrefixStats:
    """Cumulative sums over (z - shift), length n_total + 1, index 0 = 0.

    The shift is the global mean of the series; conditioning on it keeps
    catastrophic cancellation in check for long, large-magnitude series.
    The raw values are kept alongside so interval algorithms can recompute
    locally conditioned sums at full precision.
    """

    cum_sum: np.ndarray
    cum_sumsq: np.ndarray
    shift: float
    n_total: int
    values: np.ndarray = None


def _values_of(z) -> np.ndarray:
    values = getattr(z, "values", z)
    return np.asarray(values, dtype=np.float64)


def build_prefix_stats(z) -> PrefixStats:
    """Build prefix sums for a movement series (or any 1-D float array)."""
    values = _values_of(z)
    if values.size == 0:
        raise EmptyDataError("cannot build prefix stats over an empty series")
    shift = float(values.mean())
    centered = values - shift
    cum_sum = np.concatenate(([0.0], np.cumsum(centered)))
    cum_sumsq = np.concatenate(([0.0], np.cumsum(centered * centered)))
    return PrefixStats(
        cum_sum=cum_sum,
        cum_sumsq=cum_sumsq,
        shift=shift,
        n_total=int(values.size),
        values=values,
    )


def interval_stats(p: PrefixStats, a: int, b: int) -> GaussianStats:
    """MLE stats over z_a..z_b, indices 1-based inclusive."""
    if not (1 <= a <= b <= p.n_total):
        raise BadIntervalError(f"interval [{a}..{b}] outside [1..{p.n_total}]")
    n = b - a + 1
    s = p.cum_sum[b] - p.cum_sum[a - 1]
    q = p.cum_sumsq[b] - p.cum_sumsq[a - 1]
    mean_centered = s / n
    if n == 1:
        variance = 0.0  # exact; the subtraction below only leaves rounding residue
    else:
        variance = q / n - mean_centered * mean_centered
        if variance < 0.0:
            variance = 0.0
    return GaussianStats(
        n=n, mean=float(p.shift + mean_centered), variance=float(variance)
    )


def gaussian_max_loglik(s: GaussianStats) -> float:
    """Log-likelihood of a Gaussian sample evaluated at its own MLE.

    Equals -(n/2) log(2 pi sigma^2) - n/2.
    """
    if s.variance <= 0.0:
        raise DegenerateVarianceError("zero variance has no finite log-likelihood")
    return -0.5 * s.n * (LOG_2PI + math.log(s.variance)) - 0.5 * s.n


def merge_stats(a: GaussianStats, b: GaussianStats) -> GaussianStats:
    """Pool two samples by sufficient statistics.

    The pooled variance is the MLE over the union, so it includes the
    between-means term.
    """
    n = a.n + b.n
    mean = (a.n * a.mean + b.n * b.mean) / n
    second_moment = (
        a.n * (a.variance + a.mean * a.mean) + b.n * (b.variance + b.mean * b.mean)
    ) / n
    variance = second_moment - mean * mean
    if variance < 0.0:
        variance = 0.0
    return GaussianStats(n=n, mean=mean, variance=variance)
