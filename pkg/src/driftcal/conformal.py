"""Weighted empirical score distributions and prediction-set construction.

The central object is a normalized point-mass distribution over finite
calibration scores plus one atom at +infinity.  Every conformal variant
in this library (standard, density-ratio weighted, fixed-weight
nonexchangeable, and the regularized pipeline in
:mod:`driftcal.pipeline`) reduces to building such a distribution and
taking its (1 - alpha)-quantile as the set threshold.

Infinity is represented by ``math.inf``: it compares greater than every
finite score, and a threshold of ``inf`` yields the full label set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDistribution,
    EmptyCalibration,
    InvalidQuantileLevel,
    InvalidWeight,
    ShapeError,
)
from .scores import ScoreKind, score_matrix

# Cumulative-mass comparisons use `cum >= q - _CUM_EPS` instead of a strict
# `>=`.  Normalized masses are rounded floats, so an exact boundary such as
# nine masses of 1/10 accumulating to 0.9 lands one ulp short; the guard is
# far above accumulated roundoff (~1e-13 even for 1e6 atoms) and far below
# any meaningful mass difference.
_CUM_EPS = 1e-9


@dataclass(frozen=True)
class WeightedScoreDistribution:
    """Normalized atoms on finite scores plus a mass at +infinity.

    ``scores`` is sorted ascending with duplicates merged; ``masses`` are
    the corresponding probabilities and sum with ``infinity_mass`` to 1.
    """

    scores: np.ndarray
    masses: np.ndarray
    infinity_mass: float

    def total_mass(self) -> float:
        return float(self.masses.sum() + self.infinity_mass)


@dataclass(frozen=True)
class Threshold:
    """A score cutoff together with the quantile level that produced it."""

    q: float
    level: float

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise InvalidQuantileLevel(f"level must be in (0, 1), got {self.level}")

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.q)


@dataclass(frozen=True)
class PredictionSet:
    """Label indices whose score fell at or below the threshold."""

    members: frozenset[int]
    threshold_used: Threshold
    n_labels: int = field(default=0)

    def __len__(self) -> int:
        return len(self.members)

    def sorted_members(self) -> list[int]:
        return sorted(self.members)


def build_distribution(scores, weights, infinity_weight: float) -> WeightedScoreDistribution:
    """Normalize weights into a score distribution with an infinity atom.

    Atom i gets mass ``w_i / (sum(w) + infinity_weight)`` and the infinity
    atom gets the remainder; equal scores are merged by mass addition and
    zero-mass atoms dropped.

    Raises
    ------
    InvalidWeight
        If any weight (or the infinity weight) is negative or non-finite.
    DegenerateDistribution
        If the total weight is zero.
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if s.shape != w.shape:
        raise ShapeError(f"{s.size} scores vs {w.size} weights")
    if not (np.all(np.isfinite(w)) and math.isfinite(infinity_weight)):
        raise InvalidWeight("weights must be finite")
    if np.any(w < 0) or infinity_weight < 0:
        raise InvalidWeight("weights must be non-negative")
    if not np.all(np.isfinite(s)):
        raise InvalidWeight("calibration scores must be finite")
    total = float(w.sum() + infinity_weight)
    if total <= 0.0:
        raise DegenerateDistribution("total weight is zero")

    order = np.argsort(s, kind="stable")
    s_sorted = s[order]
    m_sorted = w[order] / total
    uniq, start = np.unique(s_sorted, return_index=True)
    merged = np.add.reduceat(m_sorted, start) if uniq.size else m_sorted
    keep = merged > 0.0
    return WeightedScoreDistribution(
        scores=uniq[keep],
        masses=merged[keep],
        infinity_mass=infinity_weight / total,
    )


def quantile(dist: WeightedScoreDistribution, q: float) -> float:
    """Smallest support point (possibly ``inf``) with cumulative mass >= q.

    The comparison tolerates ``_CUM_EPS`` of float roundoff so that exact
    mass boundaries (e.g. the classical ceil((1-alpha)(n+1)) split-CP
    index) resolve to the finite atom rather than spuriously escalating
    to infinity.
    """
    if not 0.0 < q < 1.0:
        raise InvalidQuantileLevel(f"quantile level must be in (0, 1), got {q}")
    cum = 0.0
    for score, mass in zip(dist.scores, dist.masses):
        cum += mass
        if cum >= q - _CUM_EPS:
            return float(score)
    if dist.infinity_mass > 0.0:
        return math.inf
    # All mass is on finite atoms; rounding left cum fractionally below q.
    if dist.scores.size:
        return float(dist.scores[-1])
    raise DegenerateDistribution("empty distribution")


def prediction_set(test_probs, threshold: Threshold, kind: ScoreKind) -> PredictionSet:
    """All labels whose score is <= the threshold (inclusive).

    An infinite threshold includes every label.
    """
    p = np.asarray(test_probs, dtype=np.float64).reshape(1, -1)
    k = p.shape[1]
    if threshold.is_infinite:
        members = frozenset(range(k))
    else:
        row = score_matrix(p, kind)[0]
        members = frozenset(int(y) for y in np.nonzero(row <= threshold.q)[0])
    return PredictionSet(members=members, threshold_used=threshold, n_labels=k)


def standard_cp_threshold(cal_scores, alpha: float) -> Threshold:
    """Split-conformal threshold: uniform weights and unit infinity mass."""
    s = np.asarray(cal_scores, dtype=np.float64).reshape(-1)
    if s.size == 0:
        raise EmptyCalibration("standard CP needs at least one calibration score")
    dist = build_distribution(s, np.ones_like(s), 1.0)
    level = 1.0 - alpha
    return Threshold(q=quantile(dist, level), level=level)


def weighted_cp_threshold(cal_scores, cal_ratios, test_ratio: float, alpha: float) -> Threshold:
    """Density-ratio weighted threshold; depends on the test point's ratio.

    The test point's own ratio becomes the infinity mass, so each test
    point gets its own threshold.
    """
    dist = build_distribution(cal_scores, cal_ratios, test_ratio)
    level = 1.0 - alpha
    return Threshold(q=quantile(dist, level), level=level)


def nonexch_cp_threshold(cal_scores, fixed_weights, alpha: float) -> Threshold:
    """Fixed-weight threshold with unit infinity mass; weights in [0, 1]."""
    w = np.asarray(fixed_weights, dtype=np.float64).reshape(-1)
    if np.any(w < 0) or np.any(w > 1):
        raise InvalidWeight("fixed weights must lie in [0, 1]")
    dist = build_distribution(cal_scores, w, 1.0)
    level = 1.0 - alpha
    return Threshold(q=quantile(dist, level), level=level)
