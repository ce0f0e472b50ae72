"""End-to-end domain-shift-aware calibration and prediction.

Calibration-point weights come from a :class:`~driftcal.ratio.DensityRatioModel`
(or any non-negative vector), the test-point weight is replaced by a
regularized value lambda chosen by a policy, and the resulting weighted
score distribution yields one threshold that serves every test point of
the target domain.  With uniform weights and lambda = 1 the pipeline
reproduces standard split CP bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .conformal import PredictionSet, Threshold, build_distribution, prediction_set, quantile
from .errors import InvalidWeight, ParseError, ShapeError
from .ratio import DensityRatioModel
from .scores import ScoreKind, softmax


@dataclass(frozen=True)
class LambdaPolicy:
    """How to pick the regularized weight for the infinity atom.

    * ``fixed`` uses a constant (default 1, which makes the no-shift case
      coincide with standard CP).
    * ``max`` uses the largest calibration weight, satisfying the
      hypothesis of the coverage bounds.
    * ``quantile`` uses the empirical q-quantile of the weights
      (q = 1 reduces to ``max``).
    """

    kind: str = "fixed"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("fixed", "max", "quantile"):
            raise InvalidWeight(f"unknown lambda policy {self.kind!r}")
        if self.kind == "fixed" and self.value < 0:
            raise InvalidWeight("fixed lambda must be >= 0")
        if self.kind == "quantile" and not 0.0 < self.value <= 1.0:
            raise InvalidWeight("lambda quantile must be in (0, 1]")

    @classmethod
    def fixed(cls, value: float = 1.0) -> "LambdaPolicy":
        return cls(kind="fixed", value=value)

    @classmethod
    def max_weight(cls) -> "LambdaPolicy":
        return cls(kind="max", value=0.0)

    @classmethod
    def weight_quantile(cls, q: float) -> "LambdaPolicy":
        return cls(kind="quantile", value=q)

    @classmethod
    def parse(cls, text: str) -> "LambdaPolicy":
        """Parse a CLI spelling: a number, ``max``, or ``q:<level>``."""
        text = text.strip().lower()
        if text == "max":
            return cls.max_weight()
        if text.startswith("q:"):
            return cls.weight_quantile(float(text[2:]))
        try:
            return cls.fixed(float(text))
        except ValueError:
            raise InvalidWeight(f"cannot parse lambda policy {text!r}") from None

    def describe(self) -> str:
        if self.kind == "fixed":
            return f"fixed({self.value:g})"
        if self.kind == "max":
            return "max-weight"
        return f"weight-quantile({self.value:g})"


def compute_weights(model: DensityRatioModel, cal_embeds) -> np.ndarray:
    """Estimated density ratio at each calibration embedding."""
    return model.ratios(cal_embeds)


def resolve_lambda(policy: LambdaPolicy, weights) -> float:
    """Turn a policy into a concrete lambda for the given weights."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.size == 0:
        raise ShapeError("need at least one weight to resolve lambda")
    if policy.kind == "fixed":
        return float(policy.value)
    if policy.kind == "max":
        return float(w.max())
    k = math.ceil(policy.value * w.size)
    return float(np.sort(w)[k - 1])


@dataclass(frozen=True)
class DscpCalibration:
    """Frozen calibration artifact; one threshold for a whole domain pair."""

    weights: np.ndarray
    lam: float
    alpha: float
    score_kind: ScoreKind
    threshold: Threshold
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.weights.shape[0])


def calibrate(cal_scores, weights, lam: float, alpha: float, kind: ScoreKind,
              provenance: dict | None = None) -> DscpCalibration:
    """Build the regularized weighted distribution and take its quantile.

    The threshold depends only on calibration data (scores, weights) and
    lambda, never on any test point.
    """
    s = np.asarray(cal_scores, dtype=np.float64).reshape(-1)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if s.shape != w.shape:
        raise ShapeError(f"{s.size} scores vs {w.size} weights")
    if lam < 0:
        raise InvalidWeight(f"lambda must be >= 0, got {lam}")
    dist = build_distribution(s, w, lam)
    level = 1.0 - alpha
    return DscpCalibration(
        weights=w.copy(),
        lam=float(lam),
        alpha=float(alpha),
        score_kind=kind,
        threshold=Threshold(q=quantile(dist, level), level=level),
        provenance=dict(provenance or {}),
    )


def predict(cal: DscpCalibration, test_logits) -> PredictionSet:
    """Prediction set for one test prompt's logits under a calibration."""
    probs = softmax(test_logits)
    return prediction_set(probs, cal.threshold, cal.score_kind)


def save_calibration(cal: DscpCalibration, path) -> None:
    """Write the artifact as JSON; threshold and weights round-trip exactly.

    An infinite threshold is stored as the string ``"inf"``.
    """
    payload = {
        "alpha": cal.alpha,
        "lambda": cal.lam,
        "score_kind": cal.score_kind.value,
        "threshold": "inf" if cal.threshold.is_infinite else cal.threshold.q,
        "weights": [float(w) for w in cal.weights],
        "provenance": cal.provenance,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_calibration(path) -> DscpCalibration:
    """Read an artifact written by :func:`save_calibration`."""
    p = Path(path)
    if not p.is_file():
        raise ParseError(f"calibration artifact not found: {p}")
    try:
        payload = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid calibration artifact {p}: {exc}") from None
    try:
        raw_threshold = payload["threshold"]
        q = math.inf if raw_threshold == "inf" else float(raw_threshold)
        alpha = float(payload["alpha"])
        return DscpCalibration(
            weights=np.asarray(payload["weights"], dtype=np.float64),
            lam=float(payload["lambda"]),
            alpha=alpha,
            score_kind=ScoreKind(payload["score_kind"]),
            threshold=Threshold(q=q, level=1.0 - alpha),
            provenance=dict(payload.get("provenance", {})),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"malformed calibration artifact {p}: {exc}") from None


__all__ = [
    "LambdaPolicy",
    "DscpCalibration",
    "compute_weights",
    "resolve_lambda",
    "calibrate",
    "predict",
    "save_calibration",
    "load_calibration",
]
