"""Nonconformity scores for multiple-choice classifiers.

Logits over the K answer choices are turned into softmax probabilities,
and two scores are supported:

* ``lac``: one minus the probability of the true label.
* ``aps``: total probability mass on labels strictly more probable than
  the true label.  Ties contribute nothing and the label's own mass is
  excluded, so the top label always scores exactly 0.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import InvalidLabel, InvalidLogits, ShapeError


class ScoreKind(str, enum.Enum):
    """Which nonconformity score to use."""

    LAC = "lac"
    APS = "aps"


def softmax(logits) -> np.ndarray:
    """Convert one logit vector into choice probabilities.

    Uses max-subtraction for overflow safety; the argmax is preserved and
    adding a constant to all logits leaves the output unchanged.

    Raises
    ------
    InvalidLogits
        If the vector has fewer than 2 entries or any non-finite value.
    """
    v = np.asarray(logits, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise InvalidLogits(f"need a 1-D vector with K >= 2 choices, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidLogits("logits must be finite")
    e = np.exp(v - v.max())
    return e / e.sum()


def softmax_rows(logit_rows) -> np.ndarray:
    """Row-wise softmax for an (n, K) logit matrix."""
    m = np.asarray(logit_rows, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] < 2:
        raise InvalidLogits(f"need an (n, K) matrix with K >= 2, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidLogits("logits must be finite")
    e = np.exp(m - m.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _check_label(probs: np.ndarray, label: int) -> int:
    label = int(label)
    if not 0 <= label < probs.shape[-1]:
        raise InvalidLabel(f"label {label} outside [0, {probs.shape[-1]})")
    return label


def lac_score(probs, label: int) -> float:
    """1 - probs[label]; lies in [0, 1]."""
    p = np.asarray(probs, dtype=np.float64)
    label = _check_label(p, label)
    return float(1.0 - p[label])


def aps_score(probs, label: int) -> float:
    """Sum of probabilities strictly greater than probs[label].

    The label's own mass is excluded and ties contribute 0, so the value
    lies in [0, 1 - probs[label]].
    """
    p = np.asarray(probs, dtype=np.float64)
    label = _check_label(p, label)
    return float(p[p > p[label]].sum())


def score_matrix(probs_rows: np.ndarray, kind: ScoreKind) -> np.ndarray:
    """Score every candidate label for every row.

    Parameters
    ----------
    probs_rows : (n, K) array of choice probabilities.
    kind : which score to compute.

    Returns
    -------
    (n, K) array where entry [i, y] is the score of candidate y on row i.
    """
    p = np.asarray(probs_rows, dtype=np.float64)
    if p.ndim != 2:
        raise ShapeError(f"expected (n, K) probabilities, got shape {p.shape}")
    if kind is ScoreKind.LAC:
        return 1.0 - p
    out = np.empty_like(p)
    for y in range(p.shape[1]):
        greater = p > p[:, y : y + 1]
        out[:, y] = np.where(greater, p, 0.0).sum(axis=1)
    return out


def score_batch(logit_rows, labels, kind: ScoreKind) -> np.ndarray:
    """Softmax each row and score its true label.

    Equivalent to mapping ``lac_score``/``aps_score`` over the rows, but
    vectorized. Order is preserved; an empty batch yields an empty array.
    """
    m = np.asarray(logit_rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if m.ndim != 2:
        if m.size == 0:
            m = m.reshape(0, 2)
        else:
            raise ShapeError(f"expected (n, K) logits, got shape {m.shape}")
    if m.shape[0] != y.shape[0]:
        raise ShapeError(f"{m.shape[0]} logit rows vs {y.shape[0]} labels")
    if m.shape[0] == 0:
        return np.empty(0, dtype=np.float64)
    if np.any((y < 0) | (y >= m.shape[1])):
        raise InvalidLabel(f"labels must lie in [0, {m.shape[1]})")
    probs = softmax_rows(m)
    return score_matrix(probs, kind)[np.arange(m.shape[0]), y]
