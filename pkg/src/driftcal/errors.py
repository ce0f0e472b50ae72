"""Exception hierarchy shared across the library.

Every error raised by driftcal derives from :class:`DriftcalError`, so
callers (including the CLI) can distinguish validation failures from
genuine bugs with a single except clause.
"""


class DriftcalError(Exception):
    """Base class for all driftcal errors."""


class InvalidLogits(DriftcalError):
    """Logit vector is empty, too short, or contains non-finite values."""


class InvalidLabel(DriftcalError):
    """Label index is outside [0, K)."""


class ShapeError(DriftcalError):
    """Array lengths or dimensions do not line up."""


class InvalidWeight(DriftcalError):
    """A weight violates its admissible range."""


class DegenerateDistribution(DriftcalError):
    """Total weight is zero; no distribution can be formed."""


class InvalidQuantileLevel(DriftcalError):
    """Quantile level outside the open interval (0, 1)."""


class EmptyCalibration(DriftcalError):
    """Calibration requires at least one score."""


class DegenerateTraining(DriftcalError):
    """Classifier training received an empty class."""


class InvalidProbability(DriftcalError):
    """Probability outside the open interval (0, 1)."""


class InvalidSpec(DriftcalError):
    """Synthetic-data spec is inconsistent or out of range."""


class InvalidTV(DriftcalError):
    """Total-variation value outside [0, 1]."""


class IncompatibleDatasets(DriftcalError):
    """Two datasets disagree on embedding dimension or label count."""


class MissingMethod(DriftcalError):
    """A sweep report lacks results for a requested method."""


class ParseError(DriftcalError):
    """A file could not be read or decoded."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class DimensionMismatch(ParseError):
    """A record's embedding or logits length differs from the expected one."""


class LabelOutOfRange(ParseError):
    """A record's label is outside [0, K)."""


class RecordError(DriftcalError):
    """A record contains values that cannot be serialized (e.g. NaN)."""


class LengthMismatch(DriftcalError):
    """An external weights file has the wrong number of entries."""


class NegativeWeight(DriftcalError):
    """An external weights file contains a negative entry."""


class ManifestError(DriftcalError):
    """A dataset manifest is invalid or its checksums do not verify."""
