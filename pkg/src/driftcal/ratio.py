"""Embedding-space density-ratio estimation via a domain classifier.

Calibration embeddings are labeled 0 (old domain) and test embeddings 1
(new domain).  An L2-regularized logistic regression, fit by
deterministic full-batch gradient descent, estimates p(z) = P(domain=1 |
z); the density ratio is the classifier odds times the class-prior ratio
n0/n1, clipped to a configurable range so a confident classifier cannot
produce unbounded weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateTraining,
    InvalidProbability,
    LengthMismatch,
    NegativeWeight,
    ParseError,
    ShapeError,
)

PROB_CLAMP = 1e-6
DEFAULT_CLIP = (1e-3, 1e3)


@dataclass(frozen=True)
class ClassifierConfig:
    """Gradient-descent settings for the domain classifier.

    Gradient descent itself is deterministic (zero init, fixed step);
    the seed only drives the optional test-pool hold-out selection.
    """

    l2: float = 1e-4
    max_iters: int = 500
    tol: float = 1e-10
    seed: int = 0


@dataclass(frozen=True)
class TrainingMeta:
    iterations: int
    final_loss: float
    l2: float


@dataclass(frozen=True)
class ClassifierModel:
    """Linear domain classifier: p(z) = sigmoid(<coef, z> + intercept)."""

    coefficients: np.ndarray
    intercept: float
    meta: TrainingMeta

    @property
    def dim(self) -> int:
        return int(self.coefficients.shape[0])


@dataclass(frozen=True)
class DensityRatioModel:
    """Domain classifier plus prior correction and clip bounds."""

    classifier: ClassifierModel
    prior_ratio: float  # n_cal / n_test
    clip_bounds: tuple[float, float] = field(default=DEFAULT_CLIP)

    def ratio(self, z) -> float:
        """Estimated density ratio at a single embedding."""
        p = predict_prob(self.classifier, z)
        return density_ratio(p, self.prior_ratio, self.clip_bounds)

    def ratios(self, embeddings) -> np.ndarray:
        """Vectorized ratio over an (n, d) embedding matrix."""
        p = predict_prob_rows(self.classifier, embeddings)
        odds = p / (1.0 - p) * self.prior_ratio
        return np.clip(odds, self.clip_bounds[0], self.clip_bounds[1])


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _logistic_loss(theta: np.ndarray, x: np.ndarray, y: np.ndarray, l2: float) -> float:
    # theta[:-1] are coefficients, theta[-1] the (unpenalized) intercept.
    z = x @ theta[:-1] + theta[-1]
    # log(1 + exp(-t)) evaluated stably for |z| large.
    margins = np.where(y == 1, -z, z)
    losses = np.logaddexp(0.0, margins)
    return float(losses.mean() + 0.5 * l2 * float(theta[:-1] @ theta[:-1]))


def train_domain_classifier(cal_embeds, test_embeds, config: ClassifierConfig) -> ClassifierModel:
    """Fit the domain classifier by full-batch gradient descent.

    The step size is 1/L with L = 0.25 * max row norm squared (intercept
    column included) + l2, a Lipschitz bound for the regularized logistic
    loss, so the training loss is non-increasing without any line search.
    Training is deterministic: zero initialization, fixed step, fixed
    iteration order.

    Raises
    ------
    ShapeError
        If the two embedding sets have different dimensions.
    DegenerateTraining
        If either domain is empty.
    """
    x0 = np.asarray(cal_embeds, dtype=np.float64)
    x1 = np.asarray(test_embeds, dtype=np.float64)
    if x0.ndim != 2 or x1.ndim != 2:
        raise ShapeError("embedding sets must be 2-D (n, d) arrays")
    if x0.shape[0] == 0 or x1.shape[0] == 0:
        raise DegenerateTraining("both domains need at least one embedding")
    if x0.shape[1] != x1.shape[1]:
        raise ShapeError(f"dimension mismatch: {x0.shape[1]} vs {x1.shape[1]}")

    x = np.vstack([x0, x1])
    y = np.concatenate([np.zeros(x0.shape[0]), np.ones(x1.shape[0])])
    n, d = x.shape

    max_row_sq = float((x * x).sum(axis=1).max()) + 1.0  # +1 for intercept column
    lipschitz = 0.25 * max_row_sq + config.l2
    step = 1.0 / lipschitz

    theta = np.zeros(d + 1)
    loss = _logistic_loss(theta, x, y, config.l2)
    iterations = 0
    for _ in range(config.max_iters):
        p = _sigmoid(x @ theta[:-1] + theta[-1])
        resid = p - y
        grad = np.empty(d + 1)
        grad[:-1] = x.T @ resid / n + config.l2 * theta[:-1]
        grad[-1] = resid.mean()
        theta = theta - step * grad
        iterations += 1
        new_loss = _logistic_loss(theta, x, y, config.l2)
        if loss - new_loss <= config.tol:
            loss = new_loss
            break
        loss = new_loss

    return ClassifierModel(
        coefficients=theta[:-1].copy(),
        intercept=float(theta[-1]),
        meta=TrainingMeta(iterations=iterations, final_loss=loss, l2=config.l2),
    )


def predict_prob(model: ClassifierModel, z) -> float:
    """P(domain=1 | z), clamped to [1e-6, 1 - 1e-6]."""
    v = np.asarray(z, dtype=np.float64).reshape(-1)
    if v.shape[0] != model.dim:
        raise ShapeError(f"embedding has dim {v.shape[0]}, model expects {model.dim}")
    p = _sigmoid(np.array([v @ model.coefficients + model.intercept]))[0]
    return float(min(max(p, PROB_CLAMP), 1.0 - PROB_CLAMP))


def predict_prob_rows(model: ClassifierModel, embeddings) -> np.ndarray:
    """Vectorized ``predict_prob`` over an (n, d) matrix."""
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise ShapeError(f"expected (n, {model.dim}) embeddings, got shape {x.shape}")
    p = _sigmoid(x @ model.coefficients + model.intercept)
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def density_ratio(p: float, prior_ratio: float, clip: tuple[float, float] = DEFAULT_CLIP) -> float:
    """Classifier probability -> clipped density ratio p/(1-p) * prior."""
    if not 0.0 < p < 1.0:
        raise InvalidProbability(f"probability must be in (0, 1), got {p}")
    if prior_ratio <= 0.0:
        raise InvalidProbability(f"prior ratio must be positive, got {prior_ratio}")
    lo, hi = clip
    return float(min(max(p / (1.0 - p) * prior_ratio, lo), hi))


def fit_density_ratio(
    cal_embeds,
    test_embeds,
    config: ClassifierConfig = ClassifierConfig(),
    clip: tuple[float, float] = DEFAULT_CLIP,
    test_holdout: float = 0.0,
) -> DensityRatioModel:
    """Train the classifier and assemble the full ratio model.

    By default the whole test-prompt pool trains the classifier
    (transductive use).  ``test_holdout`` excludes that fraction of test
    embeddings from training, selected deterministically from
    ``config.seed``, for workflows that keep evaluated prompts out of
    the estimator.  The prior ratio uses the trained sample counts.
    """
    if not 0.0 <= test_holdout < 1.0:
        raise InvalidProbability(f"test_holdout must be in [0, 1), got {test_holdout}")
    x1 = np.asarray(test_embeds, dtype=np.float64)
    if test_holdout > 0.0 and x1.ndim == 2:
        n_keep = max(1, int(round(x1.shape[0] * (1.0 - test_holdout))))
        rng = np.random.default_rng(config.seed)
        kept = np.sort(rng.permutation(x1.shape[0])[:n_keep])
        x1 = x1[kept]
    classifier = train_domain_classifier(cal_embeds, x1, config)
    n0 = np.asarray(cal_embeds).shape[0]
    return DensityRatioModel(classifier=classifier, prior_ratio=n0 / x1.shape[0], clip_bounds=clip)


def import_external_weights(path, expected_n: int | None = None) -> np.ndarray:
    """Read one non-negative weight per line from a plain-text file.

    Admits weights computed by an external estimator (e.g. a tree
    ensemble) in place of the in-repo classifier.

    Raises
    ------
    ParseError
        If the file is missing or a line is not a number.
    NegativeWeight
        If any entry is negative.
    LengthMismatch
        If ``expected_n`` is given and the count differs.
    """
    p = Path(path)
    if not p.is_file():
        raise ParseError(f"weights file not found: {p}")
    weights = []
    for lineno, raw in enumerate(p.read_text().splitlines(), start=1):
        text = raw.strip()
        if not text:
            continue
        try:
            value = float(text)
        except ValueError:
            raise ParseError(f"not a number: {text!r}", line=lineno) from None
        if not np.isfinite(value):
            raise ParseError(f"non-finite weight: {text!r}", line=lineno)
        if value < 0:
            raise NegativeWeight(f"line {lineno}: negative weight {value}")
        weights.append(value)
    out = np.asarray(weights, dtype=np.float64)
    if expected_n is not None and out.size != expected_n:
        raise LengthMismatch(f"expected {expected_n} weights, file has {out.size}")
    return out
