"""Exception types shared across the toolkit."""


class CanfpError(Exception):
    """Base class for all toolkit errors."""


class LengthMismatchError(CanfpError):
    """Sample count does not match bits x samples-per-bit, or vector lengths differ."""


class UnknownIdentifierError(CanfpError):
    """Claimed message identifier is absent from the authorization table."""


class NonFiniteSampleError(CanfpError):
    """A voltage sample is NaN or infinite."""


class NonDivisibleSampleRateError(CanfpError):
    """Sample rate is not an integer multiple of the bit rate."""


class ZeroFactorError(CanfpError):
    """Downsampling factor must be a positive integer."""


class NoCrossingFoundError(CanfpError):
    """A bit transition implied an edge but the midpoint threshold was never crossed."""


class EmptyGroupError(CanfpError):
    """Operation requires at least one symbol in the group."""


class EmptyInputError(CanfpError):
    """Operation requires a non-empty input collection."""


class ZeroTemplateSampleError(CanfpError):
    """Template sample magnitude below 1 mV; window reaches into the recessive region."""


class InsufficientDataError(CanfpError):
    """Not enough data points for the requested statistic."""


class InsufficientFramesError(CanfpError):
    """Trace does not contain enough frames for the requested operation."""


class SingleClassError(CanfpError):
    """Training data contains fewer than two sender classes."""


class DegenerateFeaturesError(CanfpError):
    """All training rows are identical; nothing to separate."""


class DimensionMismatchError(CanfpError):
    """Feature vector length does not match the model."""


class EmptyUpdateSetError(CanfpError):
    """Model update requested with no update frames."""


class InsufficientTrustedFramesError(CanfpError):
    """Fewer trusted frames available than the update batch requires."""


class SeqMismatchError(CanfpError):
    """Records that must describe the same frame carry different sequence numbers."""


class ZeroRateError(CanfpError):
    """Rate denominator must be positive."""


class ConfigParseError(CanfpError):
    """Scenario or model configuration file could not be parsed."""
