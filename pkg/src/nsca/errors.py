"""Exception and warning types.

Every error carries a stable ``kind`` string (the class name) so the CLI can
emit machine-readable error payloads.
"""


class NscaError(Exception):
    """Base class for all library errors."""

    @property
    def kind(self):
        return type(self).__name__


class ValidationError(NscaError, ValueError):
    pass


class EmptySignal(ValidationError):
    pass


class NonFinite(ValidationError):
    pass


class EmptyEpochSet(ValidationError):
    pass


class WindowTooLarge(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class HorizonMismatch(ValidationError):
    pass


class ZeroTotalWeight(ValidationError):
    pass


class SingularB(NscaError):
    pass


class NonpositivePredictedVariance(ValidationError):
    pass


class NoPeaksFound(NscaError):
    pass


class TooFewPeaks(NscaError):
    pass


class InsufficientEpochs(NscaError):
    pass


class ConfigError(ValidationError):
    pass


class ParseError(ValidationError):
    pass


class MissingSamplingRate(ParseError):
    pass


class InsufficientStatistics(UserWarning):
    """Epoch set smaller than needed for a full-rank covariance estimate."""
