"""Tests for whether a stream of events is "almost Poisson".

A stream is almost Poisson at level ``alpha`` when its inter-event intervals
pass both a Pearson chi-square test against the exponential law (30
equiprobable bins, known rate) and a Student test for zero lag-1 correlation
between neighbouring intervals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TooFewEvents, ZeroVariance

ALPHA = 0.01
CHI2_BINS = 30
CHI2_THRESHOLD = 49.6  # chi-square(29) upper 1% point
STUDENT_THRESHOLD = 2.33
MIN_INTERVALS = 100


@dataclass(frozen=True)
class IntervalSample:
    intervals: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.intervals, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("intervals must be one-dimensional")
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("intervals must be finite and non-negative")
        object.__setattr__(self, "intervals", arr)

    @property
    def n(self) -> int:
        return len(self.intervals)


@dataclass(frozen=True)
class ChiSquareReport:
    statistic: float
    counts: tuple
    bins: int = CHI2_BINS
    threshold: float = CHI2_THRESHOLD

    @property
    def dof(self) -> int:
        return self.bins - 1

    @property
    def rejected(self) -> bool:
        return self.statistic > self.threshold


@dataclass(frozen=True)
class StudentReport:
    r: float
    statistic: float
    threshold: float = STUDENT_THRESHOLD

    @property
    def rejected(self) -> bool:
        return self.statistic > self.threshold


@dataclass(frozen=True)
class PoissonVerdict:
    chi: ChiSquareReport
    student: StudentReport
    n: int
    rate: float
    alpha: float = ALPHA

    @property
    def almost_poisson(self) -> bool:
        return not (self.chi.rejected or self.student.rejected)

    def to_dict(self) -> dict:
        return {
            "chi2": self.chi.statistic,
            "st": self.student.statistic,
            "r": self.student.r,
            "chi2_rejected": self.chi.rejected,
            "st_rejected": self.student.rejected,
            "almost_poisson": self.almost_poisson,
            "n": self.n,
            "rate": self.rate,
            "alpha": self.alpha,
        }


def _as_sample(s) -> IntervalSample:
    return s if isinstance(s, IntervalSample) else IntervalSample(np.asarray(s, dtype=np.float64))


def _require_n(s: IntervalSample) -> None:
    if s.n < MIN_INTERVALS:
        raise TooFewEvents(f"need at least {MIN_INTERVALS} intervals, got {s.n}")


def equiprobable_bin_edges(rate: float, bins: int = CHI2_BINS) -> np.ndarray:
    """Interior edges splitting exponential(rate) into ``bins`` cells of mass ``1/bins``.

    The first cell starts at 0 and the last is open to +inf, so only the
    ``bins - 1`` interior edges are returned.
    """
    if not rate > 0:
        raise ValueError(f"rate must be > 0, got {rate}")
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    j = np.arange(1, bins)
    return -np.log1p(-j / bins) / rate


def bin_counts(s, rate: float, bins: int = CHI2_BINS) -> np.ndarray:
    s = _as_sample(s)
    idx = np.searchsorted(equiprobable_bin_edges(rate, bins), s.intervals, side="right")
    return np.bincount(idx, minlength=bins)


def chi_square_exponential(s, rate: float, bins: int = CHI2_BINS,
                           threshold: float = CHI2_THRESHOLD) -> ChiSquareReport:
    s = _as_sample(s)
    _require_n(s)
    counts = bin_counts(s, rate, bins)
    expected = s.n / bins
    stat = float(np.sum((counts - expected) ** 2) / expected)
    return ChiSquareReport(stat, tuple(int(c) for c in counts), bins, threshold)


def lag1_student(s, threshold: float = STUDENT_THRESHOLD) -> StudentReport:
    """Correlation of neighbouring intervals and ``|r| * sqrt((n - 3) / (1 - r**2))``.

    ``n`` is the number of intervals, so ``n - 1`` pairs and ``n - 3`` degrees
    of freedom. Perfect correlation gives an infinite statistic.
    """
    s = _as_sample(s)
    _require_n(s)
    x, y = s.intervals[:-1], s.intervals[1:]
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(np.dot(dx, dx)), float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("intervals have zero variance; correlation undefined")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    one_minus = 1.0 - r * r
    st = math.inf if one_minus <= 0.0 else abs(r) * math.sqrt((s.n - 3) / one_minus)
    return StudentReport(r, st, threshold)


def classify_almost_poisson(s, rate: float) -> PoissonVerdict:
    s = _as_sample(s)
    return PoissonVerdict(chi_square_exponential(s, rate), lag1_student(s), s.n, float(rate))
