"""Domain-shift-aware conformal prediction for multiple-choice classifiers.

Calibration scores from a labeled old domain are reweighted by
embedding-space density ratios estimated with a domain classifier, the
test-point weight is replaced by a regularized constant, and the
(1 - alpha)-quantile of the resulting weighted score distribution (with
a point mass at +infinity) thresholds per-label nonconformity scores
into prediction sets.
"""

from .conformal import (
    PredictionSet,
    Threshold,
    WeightedScoreDistribution,
    build_distribution,
    nonexch_cp_threshold,
    prediction_set,
    quantile,
    standard_cp_threshold,
    weighted_cp_threshold,
)
from .errors import DriftcalError
from .pipeline import (
    DscpCalibration,
    LambdaPolicy,
    calibrate,
    compute_weights,
    load_calibration,
    predict,
    resolve_lambda,
    save_calibration,
)
from .ratio import (
    ClassifierConfig,
    ClassifierModel,
    DensityRatioModel,
    density_ratio,
    fit_density_ratio,
    import_external_weights,
    predict_prob,
    train_domain_classifier,
)
from .scores import ScoreKind, aps_score, lac_score, score_batch, softmax

__version__ = "0.1.0"

__all__ = [
    "DriftcalError",
    "ScoreKind",
    "softmax",
    "lac_score",
    "aps_score",
    "score_batch",
    "WeightedScoreDistribution",
    "Threshold",
    "PredictionSet",
    "build_distribution",
    "quantile",
    "prediction_set",
    "standard_cp_threshold",
    "weighted_cp_threshold",
    "nonexch_cp_threshold",
    "ClassifierConfig",
    "ClassifierModel",
    "DensityRatioModel",
    "train_domain_classifier",
    "predict_prob",
    "density_ratio",
    "fit_density_ratio",
    "import_external_weights",
    "LambdaPolicy",
    "DscpCalibration",
    "compute_weights",
    "resolve_lambda",
    "calibrate",
    "predict",
    "save_calibration",
    "load_calibration",
    "__version__",
]
