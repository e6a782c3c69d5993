"""Exception types raised across the package."""


class SoilFusionError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateImageError(SoilFusionError):
    """Image or grid has no usable structure for the requested operation."""


class EmptyInputError(SoilFusionError):
    """An operation received an empty sequence."""


class MixedSampleIdsError(SoilFusionError):
    """Replicate feature vectors belong to different samples."""


class NonPositiveCertifiedError(SoilFusionError):
    """Certified reference concentration must be strictly positive."""


class UnknownElementError(SoilFusionError):
    """Element is not covered by the correction factor table."""


class UnknownCategoryError(SoilFusionError):
    """Categorical value is outside the closed vocabulary."""


class MissingBlockError(SoilFusionError):
    """A sample lacks a predictor block required by the fusion config."""


class TooFewSamplesError(SoilFusionError):
    """Not enough samples for the requested operation."""


class NonFiniteInputError(SoilFusionError):
    """Input contains NaN or infinite values."""


class DimensionMismatchError(SoilFusionError):
    """Array dimensions do not match the model or each other."""


class NoOobRowsError(SoilFusionError):
    """Out-of-bag importance requires bootstrap resampling."""


class LengthMismatchError(SoilFusionError):
    """Paired series have different lengths."""


class ConstantTruthError(SoilFusionError):
    """R-squared is undefined for a constant measured series."""


class ZeroVarianceError(SoilFusionError):
    """Statistic is undefined for zero-variance input."""


class ZeroMeanError(SoilFusionError):
    """Coefficient of variation is undefined for zero-mean input."""


class ZeroBaselineError(SoilFusionError):
    """Relative change is undefined against a zero baseline."""


class ZeroVarianceColumnError(SoilFusionError):
    """Scaling requires every column to have nonzero variance."""


class DegenerateInputError(SoilFusionError):
    """Input matrix carries no variance to decompose."""


class InvalidSpecError(SoilFusionError):
    """Corpus spec fails validation."""


class NoImagesFoundError(SoilFusionError):
    """No decodable images with parseable names were found."""


class SchemaError(SoilFusionError):
    """A CSV file does not match its expected schema."""
